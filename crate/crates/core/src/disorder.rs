//! Gaussian coupling fields, the exponential interpolation path and the
//! `ΔJ` perturbation.
//!
//! Every random number is drawn from a ChaCha8 stream keyed by
//! `(master seed, realization, field tag)` and positioned by edge index, so a
//! field is a pure function of those keys and never of scheduling order.

use std::io::{Read, Write};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BoxLattice, Shape, Topology};

/// Independent random streams within one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum FieldTag {
    Couplings = 0,
    Target = 1,
    Perturbation = 2,
    LayerA = 3,
    LayerB = 4,
    LayerCouplings = 5,
    Resample = 6,
    Aux = 7,
}

/// Counter-based stream of standard normals and fair signs.
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(master: u64, realization: u64, tag: FieldTag) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        rng.set_stream((realization << 8) | tag as u64);
        Self { rng }
    }

    /// Jumps to the draw slot `index`; every slot spans two 64-bit words.
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(index as u128 * 4);
    }

    /// Box-Muller, one normal per slot.
    pub fn normal(&mut self) -> f64 {
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn sign(&mut self) -> i8 {
        let a = self.rng.next_u64();
        let _ = self.rng.next_u64();
        if a >> 63 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn signs(&mut self, n: usize) -> Vec<i8> {
        (0..n).map(|_| self.sign()).collect()
    }
}

/// One real coupling per lattice edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingField {
    shape: Shape,
    seed: u64,
    values: Vec<f64>,
}

impl CouplingField {
    pub fn from_values(lattice: &BoxLattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.n_edges() {
            return Err(Error::Mismatch(format!(
                "{} couplings for {} edges",
                values.len(),
                lattice.n_edges()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("coupling {i} is not finite")));
        }
        Ok(Self { shape: lattice.shape().clone(), seed: 0, values })
    }

    pub fn constant(lattice: &BoxLattice, value: f64) -> Self {
        Self { shape: lattice.shape().clone(), seed: 0, values: vec![value; lattice.n_edges()] }
    }

    /// I.i.d. standard normals for realization 0 of `seed`.
    pub fn sample(lattice: &BoxLattice, seed: u64) -> Self {
        Self::sample_stream(lattice, seed, 0, FieldTag::Couplings)
    }

    pub fn sample_stream(lattice: &BoxLattice, seed: u64, realization: u64, tag: FieldTag) -> Self {
        let values = Stream::new(seed, realization, tag).normals(lattice.n_edges());
        Self { shape: lattice.shape().clone(), seed, values }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, e: usize) -> f64 {
        self.values[e]
    }

    pub fn set(&mut self, e: usize, value: f64) {
        self.values[e] = value;
    }

    pub fn with_edge(&self, e: usize, value: f64) -> Self {
        let mut c = self.clone();
        c.values[e] = value;
        c
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check(&self, lattice: &BoxLattice) -> Result<()> {
        if &self.shape != lattice.shape() {
            return Err(Error::Mismatch("coupling field belongs to a different lattice".into()));
        }
        Ok(())
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Mismatch("coupling fields on different lattices".into()));
        }
        Ok(())
    }

    const MAGIC: &'static [u8; 4] = b"EACF";
    const VERSION: u16 = 1;

    /// Little-endian binary: magic, version, d, periodic flags, dims, seed,
    /// edge count, then one `f64` per canonical edge index.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.shape.dims.len();
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        w.write_all(&[d as u8, topology_bits(&self.shape.topology)])?;
        for &n in &self.shape.dims {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != Self::VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        r.read_exact(&mut b2)?;
        let (d, bits) = (b2[0] as usize, b2[1]);
        let mut dims = Vec::with_capacity(d);
        let mut b4 = [0u8; 4];
        for _ in 0..d {
            r.read_exact(&mut b4)?;
            dims.push(u32::from_le_bytes(b4) as usize);
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let topology = Topology::from_flags((0..d).map(|k| bits >> k & 1 == 1).collect());
        let lattice = BoxLattice::with_dims(&dims, topology)?;
        if n != lattice.n_edges() {
            return Err(Error::Format(format!("{n} values for {} edges", lattice.n_edges())));
        }
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        let mut field = Self::from_values(&lattice, values)?;
        field.seed = seed;
        Ok(field)
    }

    /// Two comment lines with the header, then `edge,value` rows. Values use
    /// the shortest round-trip decimal representation.
    pub fn to_csv(&self) -> String {
        let dims: Vec<String> = self.shape.dims.iter().map(usize::to_string).collect();
        let mut s = format!(
            "# ealab coupling field v{}\n# d={} dims={} topology={} seed={}\nedge,value\n",
            Self::VERSION,
            self.shape.dims.len(),
            dims.join("x"),
            self.shape.topology,
            self.seed
        );
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{i},{v}\n"));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().unwrap_or_default();
        if !first.starts_with("# ealab coupling field v1") {
            return Err(Error::Format("missing coupling field header".into()));
        }
        let header = lines.next().unwrap_or_default();
        let mut d = None;
        let mut dims = None;
        let mut topo = None;
        let mut seed = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header token `{tok}`")))?;
            match k {
                "d" => d = v.parse::<usize>().ok(),
                "dims" => {
                    dims = v.split('x').map(|x| x.parse::<usize>().ok()).collect::<Option<Vec<_>>>()
                }
                "topology" => topo = Some(v.to_string()),
                "seed" => seed = v.parse::<u64>().ok(),
                _ => return Err(Error::Format(format!("unknown header key `{k}`"))),
            }
        }
        let (d, dims, topo, seed) = match (d, dims, topo, seed) {
            (Some(a), Some(b), Some(c), Some(e)) => (a, b, c, e),
            _ => return Err(Error::Format("incomplete coupling field header".into())),
        };
        if dims.len() != d {
            return Err(Error::Format("dims disagree with d".into()));
        }
        let lattice = BoxLattice::with_dims(&dims, Topology::parse(&topo, d)?)?;
        if lines.next() != Some("edge,value") {
            return Err(Error::Format("missing column header".into()));
        }
        let mut values = Vec::with_capacity(lattice.n_edges());
        for (i, line) in lines.enumerate() {
            let (idx, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("bad row `{line}`")))?;
            if idx.parse::<usize>().ok() != Some(i) {
                return Err(Error::Format(format!("row {i} has edge index `{idx}`")));
            }
            values.push(v.parse::<f64>().map_err(|e| Error::Format(e.to_string()))?);
        }
        let mut field = Self::from_values(&lattice, values)?;
        field.seed = seed;
        Ok(field)
    }
}

fn topology_bits(t: &Topology) -> u8 {
    t.flags().iter().enumerate().fold(0, |acc, (k, &p)| acc | (u8::from(p) << k))
}

/// Which edges an interpolation moves; the rest stay frozen at the base field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EdgeSubset {
    All,
    Edges(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct InterpolationPath {
    pub base: CouplingField,
    pub target: CouplingField,
    pub subset: EdgeSubset,
}

impl InterpolationPath {
    pub fn new(base: CouplingField, target: CouplingField, subset: EdgeSubset) -> Result<Self> {
        base.same_shape(&target)?;
        if let EdgeSubset::Edges(es) = &subset {
            if let Some(e) = es.iter().find(|&&e| e >= base.len()) {
                return Err(Error::Invalid(format!("edge {e} outside lattice")));
            }
        }
        Ok(Self { base, target, subset })
    }

    pub fn whole(base: CouplingField, target: CouplingField) -> Result<Self> {
        Self::new(base, target, EdgeSubset::All)
    }

    pub fn single_edge(base: CouplingField, target: CouplingField, e: usize) -> Result<Self> {
        Self::new(base, target, EdgeSubset::Edges(vec![e]))
    }

    pub fn moves(&self, e: usize) -> bool {
        match &self.subset {
            EdgeSubset::All => true,
            EdgeSubset::Edges(es) => es.contains(&e),
        }
    }

    pub fn at(&self, t: f64) -> Result<CouplingField> {
        interpolate(self, t)
    }
}

/// Weights `(e^{-t}, sqrt(1 - e^{-2t}))` of the base and target fields.
pub fn path_weights(t: f64) -> (f64, f64) {
    ((-t).exp(), (-(-2.0 * t).exp_m1()).sqrt())
}

pub fn interpolate(path: &InterpolationPath, t: f64) -> Result<CouplingField> {
    if !(t >= 0.0) {
        return Err(Error::Invalid(format!("interpolation time {t} is negative")));
    }
    let (a, b) = path_weights(t);
    let mut out = path.base.clone();
    let mut apply = |e: usize| out.values[e] = a * path.base.values[e] + b * path.target.values[e];
    match &path.subset {
        EdgeSubset::All => (0..path.base.len()).for_each(&mut apply),
        EdgeSubset::Edges(es) => es.iter().copied().for_each(&mut apply),
    }
    Ok(out)
}

/// `(J + η ΔJ) / sqrt(1 + ΔJ²)` edge by edge.
pub fn perturb(j: &CouplingField, eta: &CouplingField, delta_j: f64) -> Result<CouplingField> {
    if !(delta_j >= 0.0) {
        return Err(Error::Invalid(format!("perturbation strength {delta_j} is negative")));
    }
    j.same_shape(eta)?;
    let norm = (1.0 + delta_j * delta_j).sqrt();
    let mut out = j.clone();
    for (o, (a, b)) in out.values.iter_mut().zip(j.values.iter().zip(&eta.values)) {
        *o = (a + b * delta_j) / norm;
    }
    Ok(out)
}

/// Interpolation time whose base/endpoint correlation equals that of a
/// `ΔJ` perturbation: `t = ln(1 + ΔJ²) / 2`.
pub fn deltaj_to_t(delta_j: f64) -> f64 {
    0.5 * (delta_j * delta_j).ln_1p()
}

pub fn t_to_deltaj(t: f64) -> f64 {
    (2.0 * t).exp_m1().sqrt()
}
