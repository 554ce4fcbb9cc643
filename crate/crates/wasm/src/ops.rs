use emodist::calibrate::{self, Knot, TemperatureGrid, TemperatureModel};
use emodist::dist::entropy;
use emodist::metrics::{jsd, kld, wasserstein01};
use emodist::CategoricalDistribution;

pub const KLD_EPSILON: f64 = 1e-10;

fn dist(name: &str, weights: &[f64]) -> Result<CategoricalDistribution, String> {
    CategoricalDistribution::from_weights(weights.to_vec()).map_err(|e| format!("{name}: {e}"))
}

fn pair(human: &[f64], model: &[f64]) -> Result<(CategoricalDistribution, CategoricalDistribution), String> {
    if human.len() != model.len() {
        return Err(format!("human has {} categories, model {}", human.len(), model.len()));
    }
    Ok((dist("human", human)?, dist("model", model)?))
}

pub fn divergences(human: &[f64], model: &[f64]) -> Result<[f64; 5], String> {
    let (p, q) = pair(human, model)?;
    let e = |r: Result<f64, _>| r.map_err(|e: emodist::metrics::MetricsError| e.to_string());
    Ok([e(jsd(&p, &q))?, e(kld(&p, &q, KLD_EPSILON))?, e(wasserstein01(&p, &q))?, entropy(&p), entropy(&q)])
}

pub fn apply_temperature(model: &[f64], t: f64) -> Result<Vec<f64>, String> {
    let q = dist("model", model)?;
    let m = TemperatureModel::new(t).map_err(|e| e.to_string())?;
    Ok(calibrate::apply_temperature(&q, &m).probs().to_vec())
}

pub fn temperature_curve(human: &[f64], model: &[f64], temps: &[f64]) -> Result<Vec<f64>, String> {
    let (p, q) = pair(human, model)?;
    temps
        .iter()
        .map(|&t| {
            let m = TemperatureModel::new(t).map_err(|e| e.to_string())?;
            jsd(&p, &calibrate::apply_temperature(&q, &m)).map_err(|e| e.to_string())
        })
        .collect()
}

pub fn best_temperature(human: &[f64], model: &[f64]) -> Result<f64, String> {
    let (p, q) = pair(human, model)?;
    calibrate::fit_temperature(&[(q, p)], &TemperatureGrid::default())
        .map(|m| m.t)
        .map_err(|e| e.to_string())
}

pub fn fit_isotonic(xs: &[f64], ys: &[f64]) -> Result<Vec<f64>, String> {
    if xs.len() != ys.len() {
        return Err(format!("{} x values, {} y values", xs.len(), ys.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err("points must be finite".into());
    }
    Ok(calibrate::fit_monotone_map(xs, ys)
        .map(|knots| knots.iter().flat_map(|k| [k.x, k.y]).collect())
        .unwrap_or_default())
}

pub fn eval_isotonic(knots: &[f64], x: f64) -> Result<f64, String> {
    if knots.is_empty() || knots.len() % 2 != 0 {
        return Err("knots must be non-empty [x, y] pairs".into());
    }
    let knots: Vec<Knot> = knots.chunks(2).map(|c| Knot { x: c[0], y: c[1] }).collect();
    Ok(calibrate::interpolate(&knots, x))
}
