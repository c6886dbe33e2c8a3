//! Browser bindings: three operations on a free product given as text,
//! e.g. `Z * Z`, `Z/2 * Z/3` or `Z^2 * Z/3`, always with the simple random walk.
//!
//! The `*_json` functions are plain Rust so they can be tested natively; the
//! `#[wasm_bindgen]` wrappers only turn errors into JS exceptions.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use relwalk::config::ExperimentConfig;
use relwalk::group::GroupElement;
use relwalk::parabolic::{degeneracy_test, DegeneracyOptions};
use relwalk::report::Setup;
use relwalk::walk::{is_radial, return_probabilities, Method, ReturnProbabilities};
use relwalk::Budget;

/// Exact rational arithmetic beyond this horizon gets slow in a browser tab.
const EXACT_HORIZON: usize = 40;
/// No deadline: `Instant` is unavailable on wasm32-unknown-unknown.
const MAX_ELEMENTS: usize = 2_000_000;

fn budget() -> Budget {
    Budget::new(MAX_ELEMENTS, None)
}

/// `Z`, `Z^k` and `Z/n` factors separated by `*`, turned into a config.
pub fn parse_group(spec: &str) -> Result<ExperimentConfig, String> {
    let mut toml = String::from("schema = 1\n");
    for part in spec.split('*') {
        let f = part.trim();
        let entry = if let Some(n) = f.strip_prefix("Z/") {
            let n: usize = n.trim().parse().map_err(|_| format!("bad factor {f:?}"))?;
            format!("kind = \"cyclic\"\norder = {n}")
        } else if let Some(k) = f.strip_prefix("Z^") {
            let k: usize = k.trim().parse().map_err(|_| format!("bad factor {f:?}"))?;
            format!("kind = \"free-abelian\"\nrank = {k}")
        } else if f == "Z" {
            "kind = \"free-abelian\"\nrank = 1".to_string()
        } else {
            return Err(format!("bad factor {f:?}: expected Z, Z^k or Z/n"));
        };
        toml.push_str(&format!("[[group.factors]]\n{entry}\n"));
    }
    let config = ExperimentConfig::from_toml(&toml).map_err(|e| e.to_string())?;
    config.build_group().map_err(|e| e.to_string())?;
    Ok(config)
}

fn setup(spec: &str) -> Result<(ExperimentConfig, Setup), String> {
    let config = parse_group(spec)?;
    let mut s = Setup::new(&config).map_err(|e| e.to_string())?;
    s.prepare(&config, &budget()).map_err(|e| e.to_string())?;
    Ok((config, s))
}

/// `p_n(e,e)` for `n ≤ horizon`: exact rationals up to 40 steps, the radial
/// engine beyond that when the walk allows it.
pub fn return_probabilities_json(spec: &str, horizon: usize) -> Result<Value, String> {
    let config = parse_group(spec)?;
    let group = config.build_group().map_err(|e| e.to_string())?;
    let mu = config.build_measure(&group).map_err(|e| e.to_string())?;
    let method = if horizon <= EXACT_HORIZON {
        Method::Exact
    } else if is_radial(&group, &mu).is_some() {
        Method::Radial
    } else {
        return Err(format!(
            "this walk is not radial; exact probabilities are limited to {EXACT_HORIZON} steps"
        ));
    };
    let p = return_probabilities(&group, &mu, horizon, method, &budget()).map_err(|e| e.to_string())?;
    let logs = p.log_values();
    let rows: Vec<Value> = logs
        .iter()
        .enumerate()
        .map(|(n, lp)| {
            let exact = match &p {
                ReturnProbabilities::Exact(v) => Value::String(v[n].to_string()),
                ReturnProbabilities::Radial { .. } => Value::Null,
            };
            json!({ "n": n, "exact": exact, "p": lp.exp(), "ln_p": if lp.is_finite() { json!(lp) } else { Value::Null } })
        })
        .collect();
    Ok(json!({ "method": format!("{method:?}").to_lowercase(), "rows": rows }))
}

/// `G(e,e|r)` at `r = fraction · R̂`.
pub fn green_json(spec: &str, fraction: f64) -> Result<Value, String> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err("fraction must lie in [0, 1]".into());
    }
    let (_, s) = setup(spec)?;
    let oracle = s.oracle();
    let r_hat = oracle.r_hat();
    let r = fraction * r_hat;
    let e = GroupElement::identity();
    let v = oracle.green(&e, &e, r).map_err(|e| e.to_string())?;
    Ok(json!({
        "method": if s.radial.is_some() { "radial distance chain" } else { "killed word ball" },
        "r_hat": r_hat,
        "rho_hat": 1.0 / r_hat,
        "r": r,
        "green": v.value,
        "tail": v.tail,
        "warnings": s.warnings,
    }))
}

/// Spectral degeneracy verdict along every factor at `R̂`.
pub fn degeneracy_json(spec: &str) -> Result<Value, String> {
    let (config, s) = setup(spec)?;
    let r_hat = s.oracle().r_hat();
    let opts = DegeneracyOptions {
        lengths: vec![64, 128, 256],
        ball_radii: vec![4, 6, 8],
        box_radii: vec![8, 16, 32],
        ..config.degeneracy.clone()
    };
    let rep = degeneracy_test(&s.group, &s.mu, r_hat, &opts, &budget()).map_err(|e| e.to_string())?;
    let mut v = serde_json::to_value(&rep).map_err(|e| e.to_string())?;
    v["warnings"] = json!(s.warnings);
    Ok(v)
}

fn to_js(v: Result<Value, String>) -> Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = returnProbabilities)]
pub fn return_probabilities_js(spec: &str, horizon: usize) -> Result<String, JsValue> {
    to_js(return_probabilities_json(spec, horizon))
}

#[wasm_bindgen(js_name = greenFunction)]
pub fn green_js(spec: &str, fraction: f64) -> Result<String, JsValue> {
    to_js(green_json(spec, fraction))
}

#[wasm_bindgen(js_name = degeneracy)]
pub fn degeneracy_js(spec: &str) -> Result<String, JsValue> {
    to_js(degeneracy_json(spec))
}
