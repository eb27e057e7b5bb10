//! JSON profiles: `{"kind": "zonal-coeffs" | "zonal-nodal" | "radial", "n", "s", "data", "q"?}`.
//!
//! `zonal-coeffs` holds coefficients in the orthonormal zonal basis,
//! `zonal-nodal` holds values at the `Q` Gauss–Jacobi nodes (so `Q` is the
//! data length), and `radial` holds `[rho, f(rho)]` pairs on `R^n`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constants::ProblemParams;
use crate::error::{Error, Result};
use crate::sphere::{default_quadrature, stereographic_lift, SphereContext, ZonalFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    ZonalCoeffs,
    ZonalNodal,
    Radial,
}

/// Radial samples interpolated by cubics of `ln f` in `ln rho`, constant
/// inside the first radius and decaying like `rho^{-2n/p}` beyond the last.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub rho: Vec<f64>,
    pub values: Vec<f64>,
    pub tail_power: f64,
}

impl RadialProfile {
    pub fn new(rho: Vec<f64>, values: Vec<f64>, params: &ProblemParams) -> Result<Self> {
        if rho.len() < 4 || rho.len() != values.len() {
            return Err(Error::Schema("data: radial profiles need at least 4 [rho, value] pairs".into()));
        }
        if !rho.windows(2).all(|w| w[1] > w[0]) || !(rho[0] > 0.0) {
            return Err(Error::Schema("data: radii must be positive and strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema("data: values must be finite".into()));
        }
        Ok(Self { rho, values, tail_power: 2.0 * params.nf() / params.p })
    }

    pub fn eval(&self, r: f64) -> f64 {
        let k = self.rho.len();
        if r <= self.rho[0] {
            return self.values[0];
        }
        if r >= self.rho[k - 1] {
            return self.values[k - 1] * (self.rho[k - 1] / r).powf(self.tail_power);
        }
        let j = self.rho.partition_point(|&x| x <= r).clamp(2, k - 2) - 1;
        let idx = [j - 1, j, j + 1, j + 2];
        let x = r.ln();
        let xs = idx.map(|i| self.rho[i].ln());
        let ys = idx.map(|i| self.values[i]);
        let log = ys.iter().all(|&y| y > 0.0);
        let mut total = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (x - xs[b]) / (xs[a] - xs[b]);
                }
            }
            total += w * if log { ys[a].ln() } else { ys[a] };
        }
        if log {
            total.exp()
        } else {
            total
        }
    }
}

#[derive(Debug, Clone)]
pub enum Profile {
    Zonal(ZonalFunction),
    Radial { params: ProblemParams, profile: RadialProfile },
}

impl Profile {
    pub fn params(&self) -> ProblemParams {
        match self {
            Profile::Zonal(f) => f.context().params,
            Profile::Radial { params, .. } => *params,
        }
    }

    /// Zonal form; radial profiles are lifted onto `q` nodes.
    pub fn to_zonal(&self, q: usize) -> Result<ZonalFunction> {
        match self {
            Profile::Zonal(f) => Ok(f.clone()),
            Profile::Radial { params, profile } => {
                let ctx = SphereContext::full(*params, q)?;
                stereographic_lift(&ctx, |r| profile.eval(r), params.p)
            }
        }
    }
}

#[derive(Serialize)]
struct Document<'a> {
    kind: ProfileKind,
    n: usize,
    s: f64,
    data: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<&'a usize>,
}

pub fn parse_profile(text: &str) -> Result<Profile> {
    let doc: Value = serde_json::from_str(text)?;
    let obj = doc.as_object().ok_or_else(|| Error::Schema("top level must be an object".into()))?;
    let mut problems = Vec::new();
    let kind = match obj.get("kind").map(|k| serde_json::from_value::<ProfileKind>(k.clone())) {
        Some(Ok(k)) => Some(k),
        Some(Err(_)) => {
            problems.push("kind: expected \"zonal-coeffs\", \"zonal-nodal\" or \"radial\"".to_string());
            None
        }
        None => {
            problems.push("kind: missing".to_string());
            None
        }
    };
    let n = match obj.get("n") {
        Some(v) => match v.as_u64() {
            Some(n) => Some(n as usize),
            None => {
                problems.push("n: expected a positive integer".to_string());
                None
            }
        },
        None => {
            problems.push("n: missing".to_string());
            None
        }
    };
    let s = match obj.get("s") {
        Some(v) => match v.as_f64() {
            Some(s) => Some(s),
            None => {
                problems.push("s: expected a number".to_string());
                None
            }
        },
        None => {
            problems.push("s: missing".to_string());
            None
        }
    };
    let q = match obj.get("q") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_u64() {
            Some(q) => Some(q as usize),
            None => {
                problems.push("q: expected a positive integer".to_string());
                None
            }
        },
    };
    let data = obj.get("data").and_then(Value::as_array);
    if data.is_none() {
        problems.push("data: missing or not an array".to_string());
    }
    for key in obj.keys() {
        if !matches!(key.as_str(), "kind" | "n" | "s" | "data" | "q") {
            problems.push(format!("{key}: unknown field"));
        }
    }
    let params = match (n, s) {
        (Some(n), Some(s)) => match ProblemParams::new(n, s) {
            Ok(p) => Some(p),
            Err(e) => {
                problems.push(format!("n, s: {e}"));
                None
            }
        },
        _ => None,
    };
    let (Some(kind), Some(params), Some(data)) = (kind, params, data) else {
        return Err(Error::Schema(problems.join("; ")));
    };
    if !problems.is_empty() {
        return Err(Error::Schema(problems.join("; ")));
    }
    match kind {
        ProfileKind::ZonalCoeffs | ProfileKind::ZonalNodal => {
            let mut values = Vec::with_capacity(data.len());
            for (i, v) in data.iter().enumerate() {
                match v.as_f64() {
                    Some(x) if x.is_finite() => values.push(x),
                    _ => problems.push(format!("data[{i}]: expected a finite number")),
                }
            }
            if values.is_empty() {
                problems.push("data: empty".to_string());
            }
            if !problems.is_empty() {
                return Err(Error::Schema(problems.join("; ")));
            }
            if kind == ProfileKind::ZonalNodal {
                if q.is_some_and(|q| q != values.len()) {
                    return Err(Error::Schema(format!("q: {} does not match data length {}", q.unwrap(), values.len())));
                }
                let ctx = SphereContext::full(params, values.len())?;
                Ok(Profile::Zonal(ZonalFunction::from_nodal(&ctx, values)?))
            } else {
                let q = q.unwrap_or_else(|| default_quadrature(values.len()));
                if q < values.len() {
                    return Err(Error::Schema(format!("q: {q} is below the number of coefficients {}", values.len())));
                }
                let ctx = SphereContext::full(params, q)?;
                Ok(Profile::Zonal(ZonalFunction::synthesize(&ctx, &values)?))
            }
        }
        ProfileKind::Radial => {
            let mut rho = Vec::with_capacity(data.len());
            let mut vals = Vec::with_capacity(data.len());
            for (i, v) in data.iter().enumerate() {
                match v.as_array().map(|a| a.iter().map(Value::as_f64).collect::<Vec<_>>()) {
                    Some(pair) if pair.len() == 2 && pair.iter().all(Option::is_some) => {
                        rho.push(pair[0].unwrap());
                        vals.push(pair[1].unwrap());
                    }
                    _ => problems.push(format!("data[{i}]: expected [rho, value]")),
                }
            }
            if !problems.is_empty() {
                return Err(Error::Schema(problems.join("; ")));
            }
            Ok(Profile::Radial { params, profile: RadialProfile::new(rho, vals, &params)? })
        }
    }
}

pub fn load_profile(path: impl AsRef<Path>) -> Result<Profile> {
    parse_profile(&std::fs::read_to_string(path)?)
}

/// Nodal JSON for a zonal function; floats are written in shortest
/// round-trip form, so loading the text reproduces every bit.
pub fn emit_zonal(f: &ZonalFunction) -> String {
    let ctx: &Arc<SphereContext> = f.context();
    let doc = Document {
        kind: ProfileKind::ZonalNodal,
        n: ctx.params.n,
        s: ctx.params.s,
        data: Value::from(f.values().to_vec()),
        q: None,
    };
    serde_json::to_string(&doc).expect("finite floats serialize")
}

pub fn emit_radial(params: &ProblemParams, profile: &RadialProfile) -> String {
    let data: Vec<[f64; 2]> = profile.rho.iter().zip(&profile.values).map(|(&r, &v)| [r, v]).collect();
    let doc = Document {
        kind: ProfileKind::Radial,
        n: params.n,
        s: params.s,
        data: serde_json::to_value(data).expect("finite floats serialize"),
        q: None,
    };
    serde_json::to_string(&doc).expect("finite floats serialize")
}
