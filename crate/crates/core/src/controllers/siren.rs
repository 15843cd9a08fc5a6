use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use super::ControllerError;
use crate::da::Scalar;

/// Norm below which a normalized output direction is rejected.
pub const MIN_DIRECTION_NORM: f64 = 1e-6;

/// Default frequency for SIREN layers.
pub const DEFAULT_OMEGA: f64 = 30.0;

/// `y = sin(ω(Wx + b))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SirenLayer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub omega: f64,
}

/// `y = Wx + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Element-wise affine map. Inputs are scaled as `(x - offset)·scale`,
/// outputs as `y·scale + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineScaler {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl AffineScaler {
    pub fn identity(n: usize) -> Self {
        AffineScaler { offset: vec![0.0; n], scale: vec![1.0; n] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirenNetwork {
    pub input_scale: AffineScaler,
    pub output_scale: AffineScaler,
    pub normalize_output: bool,
    pub layers: Vec<SirenLayer>,
    pub output: LinearLayer,
}

fn check_matrix(w: &[Vec<f64>], b: &[f64], inputs: usize, layer: usize) -> Result<usize, ControllerError> {
    if w.is_empty() {
        return Err(ControllerError::Dimension { layer, detail: "empty weight matrix".into() });
    }
    if b.len() != w.len() {
        return Err(ControllerError::Dimension {
            layer,
            detail: format!("bias has {} entries for {} rows", b.len(), w.len()),
        });
    }
    for (r, row) in w.iter().enumerate() {
        if row.len() != inputs {
            return Err(ControllerError::Dimension {
                layer,
                detail: format!("row {r} has {} entries, previous layer has {inputs}", row.len()),
            });
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(ControllerError::NonFinite { layer, value: *v });
        }
    }
    if let Some(v) = b.iter().find(|v| !v.is_finite()) {
        return Err(ControllerError::NonFinite { layer, value: *v });
    }
    Ok(w.len())
}

fn affine<S: Scalar>(w: &[Vec<f64>], b: &[f64], x: &[S]) -> Vec<S> {
    w.iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut acc = x[0].lift(*bi);
            for (wij, xj) in row.iter().zip(x) {
                if *wij != 0.0 {
                    acc = acc + xj.clone() * *wij;
                }
            }
            acc
        })
        .collect()
}

impl SirenNetwork {
    /// Checks dimension chaining, finiteness and frequencies.
    pub fn validate(&self) -> Result<(), ControllerError> {
        let n_in = self.input_dim();
        if self.input_scale.scale.len() != self.input_scale.offset.len() || self.input_scale.scale.len() != n_in {
            return Err(ControllerError::Dimension { layer: 0, detail: "input scaler does not match input size".into() });
        }
        let mut width = n_in;
        for (i, l) in self.layers.iter().enumerate() {
            if !(l.omega.is_finite() && l.omega > 0.0) {
                return Err(ControllerError::NonFinite { layer: i, value: l.omega });
            }
            width = check_matrix(&l.weights, &l.bias, width, i)?;
        }
        let out = check_matrix(&self.output.weights, &self.output.bias, width, self.layers.len())?;
        if self.output_scale.scale.len() != out || self.output_scale.offset.len() != out {
            return Err(ControllerError::Dimension {
                layer: self.layers.len(),
                detail: "output scaler does not match output size".into(),
            });
        }
        for v in self.input_scale.offset.iter().chain(&self.input_scale.scale).chain(&self.output_scale.offset).chain(&self.output_scale.scale) {
            if !v.is_finite() {
                return Err(ControllerError::NonFinite { layer: 0, value: *v });
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers
            .first()
            .map(|l| l.weights.first().map_or(0, |r| r.len()))
            .unwrap_or_else(|| self.output.weights.first().map_or(0, |r| r.len()))
    }

    pub fn output_dim(&self) -> usize {
        self.output.weights.len()
    }

    /// Input scaling, SIREN layers, final linear layer, output scaling and
    /// optional normalization. Floats and polynomials share this path.
    pub fn forward<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ControllerError> {
        if x.len() != self.input_dim() {
            return Err(ControllerError::Input { expected: self.input_dim(), got: x.len() });
        }
        let mut h: Vec<S> = x
            .iter()
            .zip(self.input_scale.offset.iter().zip(&self.input_scale.scale))
            .map(|(xi, (o, s))| (xi.clone() - *o) * *s)
            .collect();
        for l in &self.layers {
            h = affine(&l.weights, &l.bias, &h).into_iter().map(|z| (z * l.omega).sin()).collect();
        }
        let y: Vec<S> = affine(&self.output.weights, &self.output.bias, &h)
            .into_iter()
            .zip(self.output_scale.offset.iter().zip(&self.output_scale.scale))
            .map(|(yi, (o, s))| yi * *s + *o)
            .collect();
        if self.normalize_output {
            normalize(y)
        } else {
            Ok(y)
        }
    }

    /// Random network: first-layer weights `U(-1/M, 1/M)`, later layers
    /// `U(-√(6/M)/ω, √(6/M)/ω)` with `M` the layer's input width; zero biases.
    /// `dims` lists input, hidden widths and output.
    pub fn init(dims: &[usize], omega: f64, seed: u64) -> Result<SirenNetwork, ControllerError> {
        if dims.len() < 3 || dims.contains(&0) {
            return Err(ControllerError::Dimension { layer: 0, detail: "need input, at least one hidden layer and output".into() });
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(ControllerError::NonFinite { layer: 0, value: omega });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, cols: usize, bound: f64| -> Vec<Vec<f64>> {
            (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(-bound..=bound)).collect()).collect()
        };
        let mut layers = Vec::new();
        for i in 0..dims.len() - 2 {
            let m = dims[i] as f64;
            let bound = if i == 0 { 1.0 / m } else { (6.0 / m).sqrt() / omega };
            layers.push(SirenLayer { weights: draw(dims[i + 1], dims[i], bound), bias: vec![0.0; dims[i + 1]], omega });
        }
        let m = dims[dims.len() - 2] as f64;
        let output = LinearLayer {
            weights: draw(dims[dims.len() - 1], dims[dims.len() - 2], (6.0 / m).sqrt() / omega),
            bias: vec![0.0; dims[dims.len() - 1]],
        };
        let net = SirenNetwork {
            input_scale: AffineScaler::identity(dims[0]),
            output_scale: AffineScaler::identity(dims[dims.len() - 1]),
            normalize_output: false,
            layers,
            output,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn load(path: &Path) -> Result<SirenNetwork, ControllerError> {
        let text = std::fs::read_to_string(path).map_err(|e| ControllerError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<SirenNetwork, ControllerError> {
        let v: Value = serde_json::from_str(text).map_err(|e| ControllerError::Parse(e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn from_json(v: &Value) -> Result<SirenNetwork, ControllerError> {
        let obj = v.as_object().ok_or_else(|| ControllerError::Parse("weights file must be a JSON object".into()))?;
        let input_scale = scaler(field(obj, "input_scale", "")?, "input_scale")?;
        let output_scale = scaler(field(obj, "output_scale", "")?, "output_scale")?;
        let normalize_output = match obj.get("normalize_output") {
            None => false,
            Some(Value::Bool(b)) => *b,
            Some(_) => return Err(ControllerError::Parse("normalize_output must be a boolean".into())),
        };
        let layers_v = field(obj, "layers", "")?
            .as_array()
            .ok_or_else(|| ControllerError::Parse("layers must be an array".into()))?;
        if layers_v.is_empty() {
            return Err(ControllerError::Dimension { layer: 0, detail: "no layers".into() });
        }
        let mut layers = Vec::new();
        let mut output = None;
        for (i, lv) in layers_v.iter().enumerate() {
            let lo = lv.as_object().ok_or_else(|| ControllerError::Parse(format!("layer {i} must be an object")))?;
            let ctx = format!("layers[{i}]");
            let kind = field(lo, "type", &ctx)?.as_str().unwrap_or_default();
            let weights = matrix(field(lo, "W", &ctx)?, i)?;
            let bias = vector(field(lo, "b", &ctx)?, i)?;
            let last = i + 1 == layers_v.len();
            match (kind, last) {
                ("siren", false) => {
                    let omega = match lo.get("omega") {
                        None => DEFAULT_OMEGA,
                        Some(o) => number(o, i)?,
                    };
                    layers.push(SirenLayer { weights, bias, omega });
                }
                ("linear", true) => output = Some(LinearLayer { weights, bias }),
                ("linear", false) => {
                    return Err(ControllerError::Parse(format!("layer {i}: only the final layer may be linear")))
                }
                ("siren", true) => return Err(ControllerError::Parse("final layer must be linear".into())),
                (other, _) => return Err(ControllerError::Parse(format!("layer {i}: unknown type '{other}'"))),
            }
        }
        let net = SirenNetwork {
            input_scale,
            output_scale,
            normalize_output,
            layers,
            output: output.expect("final layer checked above"),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> Value {
        let mut layers: Vec<Value> = self
            .layers
            .iter()
            .map(|l| json!({"type": "siren", "omega": l.omega, "W": l.weights, "b": l.bias}))
            .collect();
        layers.push(json!({"type": "linear", "W": self.output.weights, "b": self.output.bias}));
        json!({
            "input_scale": {"offset": self.input_scale.offset, "scale": self.input_scale.scale},
            "output_scale": {"offset": self.output_scale.offset, "scale": self.output_scale.scale},
            "normalize_output": self.normalize_output,
            "layers": layers,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ControllerError> {
        let text = serde_json::to_string_pretty(&self.to_json()).expect("network serializes");
        std::fs::write(path, text).map_err(|e| ControllerError::Io(format!("{}: {e}", path.display())))
    }
}

/// Scales a direction vector to unit length; the norm at the expansion point
/// must exceed [`MIN_DIRECTION_NORM`].
pub fn normalize<S: Scalar>(y: Vec<S>) -> Result<Vec<S>, ControllerError> {
    let mut sq = y[0].lift(0.0);
    for v in &y {
        sq = sq + v.square();
    }
    let norm_c = sq.constant().max(0.0).sqrt();
    if norm_c <= MIN_DIRECTION_NORM {
        return Err(ControllerError::DegenerateDirection(norm_c));
    }
    let inv = sq.sqrt()?.recip()?;
    Ok(y.into_iter().map(|v| v * inv.clone()).collect())
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, ctx: &str) -> Result<&'a Value, ControllerError> {
    obj.get(name).ok_or_else(|| {
        ControllerError::MissingField(if ctx.is_empty() { name.to_string() } else { format!("{ctx}.{name}") })
    })
}

fn number(v: &Value, layer: usize) -> Result<f64, ControllerError> {
    match v {
        Value::Number(n) => n.as_f64().filter(|x| x.is_finite()).ok_or(ControllerError::NonFinite { layer, value: f64::NAN }),
        Value::Null => Err(ControllerError::NonFinite { layer, value: f64::NAN }),
        _ => Err(ControllerError::Parse(format!("layer {layer}: expected a number"))),
    }
}

fn vector(v: &Value, layer: usize) -> Result<Vec<f64>, ControllerError> {
    v.as_array()
        .ok_or_else(|| ControllerError::Parse(format!("layer {layer}: expected an array")))?
        .iter()
        .map(|x| number(x, layer))
        .collect()
}

fn matrix(v: &Value, layer: usize) -> Result<Vec<Vec<f64>>, ControllerError> {
    v.as_array()
        .ok_or_else(|| ControllerError::Parse(format!("layer {layer}: W must be an array of rows")))?
        .iter()
        .map(|row| vector(row, layer))
        .collect()
}

fn scaler(v: &Value, name: &str) -> Result<AffineScaler, ControllerError> {
    let obj = v.as_object().ok_or_else(|| ControllerError::Parse(format!("{name} must be an object")))?;
    Ok(AffineScaler {
        offset: vector(field(obj, "offset", name)?, 0)?,
        scale: vector(field(obj, "scale", name)?, 0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f64, omega: f64) -> SirenNetwork {
        SirenNetwork {
            input_scale: AffineScaler::identity(1),
            output_scale: AffineScaler::identity(1),
            normalize_output: false,
            layers: vec![SirenLayer { weights: vec![vec![w]], bias: vec![0.0], omega }],
            output: LinearLayer { weights: vec![vec![1.0]], bias: vec![0.0] },
        }
    }

    #[test]
    fn forward_examples() {
        assert_eq!(single(0.0, 30.0).forward(&[0.7]).unwrap(), vec![0.0]);
        let y = single(std::f64::consts::FRAC_PI_2, 1.0).forward(&[1.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-15);
        assert!(matches!(single(1.0, 1.0).forward(&[1.0, 2.0]), Err(ControllerError::Input { .. })));
    }

    #[test]
    fn init_respects_bounds_and_seed() {
        let omega = 30.0;
        let net = SirenNetwork::init(&[4, 32, 32, 32, 2], omega, 7).unwrap();
        for row in &net.layers[0].weights {
            assert!(row.iter().all(|w| w.abs() <= 1.0 / 4.0));
        }
        let b = (6.0f64 / 32.0).sqrt() / omega;
        for l in &net.layers[1..] {
            assert!(l.weights.iter().flatten().all(|w| w.abs() <= b));
        }
        assert!(net.output.weights.iter().flatten().all(|w| w.abs() <= b));
        assert_eq!(net, SirenNetwork::init(&[4, 32, 32, 32, 2], omega, 7).unwrap());
        assert_ne!(net, SirenNetwork::init(&[4, 32, 32, 32, 2], omega, 8).unwrap());
        assert!(SirenNetwork::init(&[], omega, 1).is_err());
    }

    #[test]
    fn json_round_trip() {
        let net = SirenNetwork::init(&[3, 8, 8, 2], 30.0, 1).unwrap();
        let back = SirenNetwork::from_json(&net.to_json()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn load_errors_are_distinct() {
        let good = SirenNetwork::init(&[2, 4, 1], 30.0, 3).unwrap().to_json();

        let mut missing = good.clone();
        missing.as_object_mut().unwrap().remove("output_scale");
        assert!(matches!(SirenNetwork::from_json(&missing), Err(ControllerError::MissingField(f)) if f == "output_scale"));

        let mut bad_row = good.clone();
        bad_row["layers"][1]["W"][0] = json!([1.0, 2.0, 3.0]);
        assert!(matches!(SirenNetwork::from_json(&bad_row), Err(ControllerError::Dimension { layer: 1, .. })));

        let mut nan = good.clone();
        nan["layers"][0]["W"][0][0] = Value::Null;
        assert!(matches!(SirenNetwork::from_json(&nan), Err(ControllerError::NonFinite { .. })));

        let mut siren_last = good.clone();
        siren_last["layers"][1]["type"] = json!("siren");
        assert!(matches!(SirenNetwork::from_json(&siren_last), Err(ControllerError::Parse(_))));
    }

    #[test]
    fn nan_weight_fails_validation() {
        let mut net = single(1.0, 1.0);
        net.layers[0].weights[0][0] = f64::NAN;
        assert!(matches!(net.validate(), Err(ControllerError::NonFinite { .. })));
    }

    #[test]
    fn normalization_yields_unit_vectors() {
        let y = normalize(vec![3.0, 4.0]).unwrap();
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
        assert!(matches!(normalize(vec![0.0, 1e-9]), Err(ControllerError::DegenerateDirection(_))));
    }
}
