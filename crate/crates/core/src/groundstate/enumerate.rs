//! Gray-code enumeration over the free spins with incremental energy updates.

use super::{Problem, Raw, DEGENERACY_TOL};
use crate::error::{Error, Result};

pub const MAX_FREE_SPINS: usize = 28;

/// Exact energy is recomputed this often to bound accumulated rounding.
const RESYNC: u64 = 1 << 12;

/// Lexicographic rank of a configuration: vertex 0 is the most significant
/// position and `-1` sorts after `+1`.
fn rank(spins: &[i8]) -> u64 {
    spins
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == -1)
        .fold(0, |acc, (v, _)| acc | 1 << (63 - v))
}

pub(crate) fn enumerate(problem: &Problem, pins: &[(usize, i8)], edge_values: &[(usize, i8)]) -> Result<Raw> {
    let n = problem.n;
    if n > 64 {
        return Err(Error::TooLarge {
            method: "enumeration",
            reason: format!("{n} vertices exceed the 64-vertex limit"),
        });
    }
    let mut spins = vec![1i8; n];
    let mut fixed = vec![false; n];
    for &(v, s) in pins {
        if fixed[v] && spins[v] != s {
            return Err(Error::Infeasible(format!("vertex {v} pinned to both signs")));
        }
        fixed[v] = true;
        spins[v] = s;
    }
    if problem.flip_symmetric && pins.is_empty() && n > 0 {
        fixed[0] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&v| !fixed[v]).collect();
    if free.len() > MAX_FREE_SPINS {
        return Err(Error::TooLarge {
            method: "enumeration",
            reason: format!("{} free spins exceed {MAX_FREE_SPINS}", free.len()),
        });
    }

    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(a, b, j) in &problem.edges {
        adj[a].push((b, j));
        adj[b].push((a, j));
    }
    // constraints touching each vertex, as (other endpoint, constraint index)
    let mut cons_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    let cons: Vec<(usize, usize, i8)> = edge_values
        .iter()
        .map(|&(e, s)| {
            let (a, b, _) = problem.edges[e];
            (a, b, s)
        })
        .collect();
    for (i, &(a, b, _)) in cons.iter().enumerate() {
        cons_at[a].push(i);
        cons_at[b].push(i);
    }
    let mut violated: Vec<bool> = cons.iter().map(|&(a, b, s)| spins[a] * spins[b] != s).collect();
    let mut n_violated = violated.iter().filter(|&&x| x).count();

    let mut e = problem.energy(&spins);
    let mut best: Option<(f64, u64, Vec<i8>)> = None;
    let mut second = f64::INFINITY;
    let total: u64 = 1 << free.len();

    for step in 0..total {
        if step > 0 {
            let v = free[step.trailing_zeros() as usize];
            let local: f64 = adj[v].iter().map(|&(w, j)| j * f64::from(spins[w])).sum::<f64>() + problem.field[v];
            e += 2.0 * f64::from(spins[v]) * local;
            spins[v] = -spins[v];
            for &c in &cons_at[v] {
                let (a, b, s) = cons[c];
                let now = spins[a] * spins[b] != s;
                if now != violated[c] {
                    violated[c] = now;
                    if now {
                        n_violated += 1;
                    } else {
                        n_violated -= 1;
                    }
                }
            }
            if step % RESYNC == 0 {
                e = problem.energy(&spins);
            }
        }
        if n_violated > 0 {
            continue;
        }
        match &mut best {
            None => best = Some((problem.energy(&spins), rank(&spins), spins.clone())),
            Some((be, bk, bs)) => {
                if e > *be + DEGENERACY_TOL {
                    second = second.min(e);
                    continue;
                }
                let exact = problem.energy(&spins);
                let key = rank(&spins);
                if exact < *be - DEGENERACY_TOL || (exact <= *be + DEGENERACY_TOL && key < *bk) {
                    second = second.min(*be);
                    *be = exact;
                    *bk = key;
                    bs.copy_from_slice(&spins);
                } else {
                    second = second.min(exact);
                }
            }
        }
    }

    match best {
        Some((_, _, spins)) => Ok(Raw { spins, second }),
        None => Err(Error::Infeasible("no configuration satisfies the constraint".into())),
    }
}
