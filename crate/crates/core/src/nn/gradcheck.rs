use rand::seq::index::sample;

use super::{Mlp, MlpGrads};
use crate::error::Result;
use crate::{rng_from_seed, Matrix};

/// Above this many parameters only a random subset is perturbed.
const MAX_CHECKED: usize = 10_000;

/// `|a - f| / max(|a|, |f|, 1e-8)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_err: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compares the gradient returned by `loss_fn` with central differences of
/// its value, parameter by parameter.
pub fn grad_check<F>(net: &mut Mlp, mut loss_fn: F, tol: f64, h: f64, seed: u64) -> Result<GradCheckReport>
where
    F: FnMut(&mut Mlp) -> Result<(f64, MlpGrads)>,
{
    let (_, analytic) = loss_fn(net)?;
    let analytic: Vec<Vec<f64>> = analytic.slices().into_iter().map(<[f64]>::to_vec).collect();
    let names = net.param_names();
    let sizes: Vec<usize> = analytic.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().sum();

    // flat indices to perturb
    let picks: Vec<usize> = if total > MAX_CHECKED {
        let mut idx = sample(&mut rng_from_seed(seed), total, MAX_CHECKED).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..total).collect()
    };

    let mut per_param: Vec<ParamCheck> = names
        .into_iter()
        .map(|name| ParamCheck {
            name,
            checked: 0,
            max_rel_err: 0.0,
        })
        .collect();

    let mut offsets = Vec::with_capacity(sizes.len());
    let mut acc = 0;
    for &s in &sizes {
        offsets.push(acc);
        acc += s;
    }

    for flat in picks {
        let tensor = offsets.partition_point(|&o| o <= flat) - 1;
        let entry = flat - offsets[tensor];
        let original = net.params_mut()[tensor][entry];
        net.params_mut()[tensor][entry] = original + h;
        let (plus, _) = loss_fn(net)?;
        net.params_mut()[tensor][entry] = original - h;
        let (minus, _) = loss_fn(net)?;
        net.params_mut()[tensor][entry] = original;
        let numeric = (plus - minus) / (2.0 * h);
        let err = rel_error(analytic[tensor][entry], numeric);
        let pc = &mut per_param[tensor];
        pc.checked += 1;
        pc.max_rel_err = pc.max_rel_err.max(err);
    }

    let max_rel_err = per_param.iter().map(|p| p.max_rel_err).fold(0.0, f64::max);
    Ok(GradCheckReport {
        params: per_param,
        max_rel_err,
        tol,
        pass: max_rel_err <= tol,
    })
}

/// Largest relative error between `analytic` and central differences of `f`
/// around `x`, over every entry.
pub fn matrix_grad_error<F>(mut f: F, x: &Matrix, analytic: &Matrix, h: f64) -> f64
where
    F: FnMut(&Matrix) -> f64,
{
    let mut probe = x.clone();
    let mut worst = 0.0f64;
    for (idx, &orig) in x.indexed_iter() {
        probe[idx] = orig + h;
        let plus = f(&probe);
        probe[idx] = orig - h;
        let minus = f(&probe);
        probe[idx] = orig;
        worst = worst.max(rel_error(analytic[idx], (plus - minus) / (2.0 * h)));
    }
    worst
}
