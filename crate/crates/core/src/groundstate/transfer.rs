//! Banded transfer dynamic program over sites in index order.
//!
//! The state after placing site `k` is the window of the last `W` spins,
//! bit `i` holding site `k - 1 - i` (set for `-1`). Every edge `(u, k)` with
//! `k - u <= W` is charged when site `k` is placed. Longer edges occur only on
//! a periodic transfer axis and must start in the first block of `W` sites; the
//! program then runs once per first-block assignment with those edges acting
//! as fields.

use super::{Problem, Raw, DEGENERACY_TOL};
use crate::error::{Error, Result};
use crate::lattice::BoxLattice;

pub const MAX_WIDTH: usize = 12;

fn width(lattice: &BoxLattice) -> usize {
    if lattice.dim() == 1 {
        1
    } else {
        lattice.dims()[0]
    }
}

pub(crate) fn supports(lattice: &BoxLattice) -> Result<()> {
    if lattice.dim() > 2 {
        return Err(Error::Unsupported(format!(
            "column_dp handles d <= 2, got d = {}",
            lattice.dim()
        )));
    }
    let w = width(lattice);
    if w > MAX_WIDTH {
        return Err(Error::TooLarge {
            method: "column_dp",
            reason: format!("cross-section width {w} exceeds {MAX_WIDTH}"),
        });
    }
    Ok(())
}

#[inline]
fn spin_at(window: usize, off: usize) -> i8 {
    1 - 2 * ((window >> (off - 1)) & 1) as i8
}

struct Layout {
    n: usize,
    w: usize,
    /// Short back edges `(offset, J)` per site.
    short: Vec<Vec<(usize, f64)>>,
    /// Long back edges `(u, J)` per site, `u` in the first block.
    long: Vec<Vec<(usize, f64)>>,
    short_cons: Vec<Vec<(usize, i8)>>,
    long_cons: Vec<Vec<(usize, i8)>>,
    pinned: Vec<i8>,
}

impl Layout {
    fn build(lattice: &BoxLattice, problem: &Problem, pins: &[(usize, i8)], edge_values: &[(usize, i8)]) -> Result<Self> {
        supports(lattice)?;
        let n = problem.n;
        let w = width(lattice);
        let mut short = vec![Vec::new(); n];
        let mut long = vec![Vec::new(); n];
        let mut short_cons = vec![Vec::new(); n];
        let mut long_cons = vec![Vec::new(); n];
        let place = |u: usize, k: usize| -> Result<bool> {
            if k - u <= w {
                Ok(true)
            } else if u < w {
                Ok(false)
            } else {
                Err(Error::Unsupported(format!("edge ({u}, {k}) spans more than the first block")))
            }
        };
        for &(u, k, j) in &problem.edges {
            if place(u, k)? {
                short[k].push((k - u, j));
            } else {
                long[k].push((u, j));
            }
        }
        for &(e, s) in edge_values {
            let (u, k, _) = problem.edges[e];
            if place(u, k)? {
                short_cons[k].push((k - u, s));
            } else {
                long_cons[k].push((u, s));
            }
        }
        let mut pinned = vec![0i8; n];
        for &(v, s) in pins {
            if pinned[v] != 0 && pinned[v] != s {
                return Err(Error::Infeasible(format!("vertex {v} pinned to both signs")));
            }
            pinned[v] = s;
        }
        if problem.flip_symmetric && pins.is_empty() && n > 0 {
            pinned[0] = 1;
        }
        Ok(Self { n, w, short, long, short_cons, long_cons, pinned })
    }

    fn needs_first_block(&self) -> bool {
        self.long.iter().any(|l| !l.is_empty()) || self.long_cons.iter().any(|l| !l.is_empty())
    }

    /// Fills `table` with the best and second-best completion cost for every
    /// `(site, window)` and returns the pair for the empty start window.
    fn sweep(&self, field: &[f64], allowed: &[i8], table: &mut Vec<[f64; 2]>) -> [f64; 2] {
        let states = 1usize << self.w;
        let mask = states - 1;
        table.clear();
        table.resize((self.n + 1) * states, [f64::INFINITY; 2]);
        for slot in &mut table[self.n * states..] {
            *slot = [0.0, f64::INFINITY];
        }
        for k in (0..self.n).rev() {
            let (head, tail) = table.split_at_mut((k + 1) * states);
            let next = &tail[..states];
            let here = &mut head[k * states..];
            for (win, out) in here.iter_mut().enumerate() {
                let mut local = field[k];
                for &(off, j) in &self.short[k] {
                    local += j * f64::from(spin_at(win, off));
                }
                let mut top = [f64::INFINITY; 2];
                for s in [1i8, -1] {
                    if allowed[k] != 0 && allowed[k] != s {
                        continue;
                    }
                    if self.short_cons[k].iter().any(|&(off, v)| s * spin_at(win, off) != v) {
                        continue;
                    }
                    let c = -f64::from(s) * local;
                    let nw = ((win << 1) | usize::from(s == -1)) & mask;
                    for x in next[nw] {
                        let x = c + x;
                        if x < top[0] {
                            top[1] = top[0];
                            top[0] = x;
                        } else if x < top[1] {
                            top[1] = x;
                        }
                    }
                }
                *out = top;
            }
        }
        table[0]
    }

    fn reconstruct(&self, field: &[f64], allowed: &[i8], table: &[[f64; 2]]) -> Vec<i8> {
        let states = 1usize << self.w;
        let mask = states - 1;
        let mut win = 0usize;
        let mut spins = Vec::with_capacity(self.n);
        for k in 0..self.n {
            let mut local = field[k];
            for &(off, j) in &self.short[k] {
                local += j * f64::from(spin_at(win, off));
            }
            let value = |s: i8| -> f64 {
                if allowed[k] != 0 && allowed[k] != s {
                    return f64::INFINITY;
                }
                if self.short_cons[k].iter().any(|&(off, v)| s * spin_at(win, off) != v) {
                    return f64::INFINITY;
                }
                let nw = ((win << 1) | usize::from(s == -1)) & mask;
                -f64::from(s) * local + table[(k + 1) * states + nw][0]
            };
            let (up, down) = (value(1), value(-1));
            let s = if up.is_finite() && up <= down + DEGENERACY_TOL { 1 } else { -1 };
            spins.push(s);
            win = ((win << 1) | usize::from(s == -1)) & mask;
        }
        spins
    }

    /// Fields and allowed values with the first block fixed to `assignment`
    /// (bit `i` set for site `i` at `-1`), or `None` if that clashes with a
    /// pin or an edge constraint.
    fn condition(&self, base_field: &[f64], assignment: usize) -> Option<(Vec<f64>, Vec<i8>)> {
        let block = self.w.min(self.n);
        let first = |u: usize| 1 - 2 * ((assignment >> u) & 1) as i8;
        let mut allowed = self.pinned.clone();
        for (u, a) in allowed.iter_mut().enumerate().take(block) {
            let s = first(u);
            if *a != 0 && *a != s {
                return None;
            }
            *a = s;
        }
        let mut field = base_field.to_vec();
        for k in 0..self.n {
            for &(u, j) in &self.long[k] {
                field[k] += j * f64::from(first(u));
            }
            for &(u, v) in &self.long_cons[k] {
                let s = v * first(u);
                if allowed[k] != 0 && allowed[k] != s {
                    return None;
                }
                allowed[k] = s;
            }
        }
        Some((field, allowed))
    }
}

pub(crate) fn column_dp(lattice: &BoxLattice, problem: &Problem, pins: &[(usize, i8)], edge_values: &[(usize, i8)]) -> Result<Raw> {
    let layout = Layout::build(lattice, problem, pins, edge_values)?;
    let mut table = Vec::new();
    if !layout.needs_first_block() {
        let top = layout.sweep(&problem.field, &layout.pinned, &mut table);
        if !top[0].is_finite() {
            return Err(Error::Infeasible("no configuration satisfies the constraint".into()));
        }
        let spins = layout.reconstruct(&problem.field, &layout.pinned, &table);
        return Ok(Raw { spins, second: top[1] });
    }

    let block = layout.w.min(layout.n);
    // first-block assignments in lexicographic order of (site 0, site 1, ...)
    let order = (0..1usize << block).map(|r| r.reverse_bits() >> (usize::BITS as usize - block));
    let mut results: Vec<(usize, [f64; 2])> = Vec::new();
    for a in order {
        if let Some((field, allowed)) = layout.condition(&problem.field, a) {
            results.push((a, layout.sweep(&field, &allowed, &mut table)));
        }
    }
    let best = results.iter().map(|(_, t)| t[0]).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::Infeasible("no configuration satisfies the constraint".into()));
    }
    let pick = results.iter().position(|(_, t)| t[0] <= best + DEGENERACY_TOL).expect("finite minimum");
    let mut second = results[pick].1[1];
    for (i, (_, t)) in results.iter().enumerate() {
        if i != pick {
            second = second.min(t[0]);
        }
    }
    let (field, allowed) = layout.condition(&problem.field, results[pick].0).expect("feasible assignment");
    layout.sweep(&field, &allowed, &mut table);
    let spins = layout.reconstruct(&field, &allowed, &table);
    Ok(Raw { spins, second })
}
