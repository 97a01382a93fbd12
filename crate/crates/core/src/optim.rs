//! Derivative-free Nelder–Mead minimization on a box.

use serde::Serialize;

use crate::error::{Error, Result};

/// Stopping rules and restarts for [`nelder_mead`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop when every vertex lies within `x_tol · max(1, |x_best|)` of the best vertex
    /// in each coordinate.
    pub x_tol: f64,
    /// Iteration cap summed over all restarts.
    pub max_iter: usize,
    /// Fresh simplices started from the best point after convergence.
    pub restarts: usize,
    /// Relative size of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            x_tol: 1e-8,
            max_iter: 2000,
            restarts: 2,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Box constraint `lo[i] <= x[i] <= hi[i]`; infinite bounds are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidInput("bounds of different lengths".into()));
        }
        if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i])) {
            return Err(Error::InvalidInput(format!(
                "empty bound interval [{}, {}] at component {i}",
                lo[i], hi[i]
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }
}

/// Minimizes `f` from `init` inside `bounds`, projecting every trial point onto the box.
///
/// The returned value never exceeds `f(init)`. A NaN objective value is an error;
/// `+∞` is treated as an infeasible point.
pub fn nelder_mead<F>(f: F, init: &[f64], bounds: &Bounds, opts: &NelderMeadOptions) -> Result<Minimum>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let d = init.len();
    if d == 0 || bounds.dim() != d {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: init {d}, bounds {}",
            bounds.dim()
        )));
    }
    if !bounds.contains(init) {
        return Err(Error::InvalidInput(format!(
            "initial point {init:?} is outside the bounds"
        )));
    }
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| -> Result<f64> {
        evaluations += 1;
        let v = f(x)?;
        if v.is_nan() {
            return Err(Error::Numerical(format!("objective is NaN at {x:?}")));
        }
        Ok(v)
    };
    let f0 = eval(init)?;
    if !f0.is_finite() {
        return Err(Error::Numerical(format!(
            "objective is not finite at the initial point {init:?}"
        )));
    }
    let mut best = (init.to_vec(), f0);
    let mut iterations = 0usize;
    let mut converged = false;
    for _round in 0..=opts.restarts {
        let (x, v, it, conv) = run_simplex(&mut eval, &best.0, best.1, bounds, opts, opts.max_iter - iterations)?;
        iterations += it;
        let improved = v < best.1;
        if v <= best.1 {
            best = (x, v);
        }
        converged = conv;
        if !conv || !improved || iterations >= opts.max_iter {
            break;
        }
    }
    Ok(Minimum {
        x: best.0,
        value: best.1,
        iterations,
        evaluations,
        converged,
    })
}

type Vertex = (Vec<f64>, f64);

fn run_simplex<E>(
    eval: &mut E,
    start: &[f64],
    f_start: f64,
    bounds: &Bounds,
    opts: &NelderMeadOptions,
    budget: usize,
) -> Result<(Vec<f64>, f64, usize, bool)>
where
    E: FnMut(&[f64]) -> Result<f64>,
{
    let d = start.len();
    let mut simplex: Vec<Vertex> = vec![(start.to_vec(), f_start)];
    for j in 0..d {
        let mut x = start.to_vec();
        let step = if x[j] != 0.0 {
            opts.initial_step * x[j].abs()
        } else {
            2.5e-4
        };
        x[j] += step;
        if x[j] > bounds.hi[j] {
            x[j] = start[j] - step;
        }
        bounds.project(&mut x);
        let v = eval(&x)?;
        simplex.push((x, v));
    }
    let centroid = |s: &[Vertex]| -> Vec<f64> {
        let mut c = vec![0.0; d];
        for (x, _) in &s[..d] {
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += xi / d as f64;
            }
        }
        c
    };
    let along = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        let mut x: Vec<f64> = c.iter().zip(w).map(|(ci, wi)| ci + t * (wi - ci)).collect();
        bounds.project(&mut x);
        x
    };
    for it in 0..budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let x0 = &simplex[0].0;
        let diameter_ok = simplex[1..].iter().all(|(x, _)| {
            x.iter()
                .zip(x0)
                .all(|(a, b)| (a - b).abs() <= opts.x_tol * b.abs().max(1.0))
        });
        if diameter_ok {
            return Ok((simplex[0].0.clone(), simplex[0].1, it, true));
        }
        let c = centroid(&simplex);
        let worst = simplex[d].clone();
        let xr = along(&c, &worst.0, -1.0);
        let fr = eval(&xr)?;
        if fr < simplex[0].1 {
            let xe = along(&c, &worst.0, -2.0);
            let fe = eval(&xe)?;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(&c, &worst.0, -0.5);
            let fc = eval(&xc)?;
            (xc, fc)
        } else {
            let xc = along(&c, &worst.0, 0.5);
            let fc = eval(&xc)?;
            (xc, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[d] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            let x = along(&best, &v.0, 0.5);
            let fx = eval(&x)?;
            *v = (x, fx);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok((simplex[0].0.clone(), simplex[0].1, budget, false))
}
