//! Architecture specifications, shape inference, and the scaling transforms.
//!
//! Scaling acts on an [`ArchitectureSpec`] and returns a new one:
//!
//! * width multiplies conv filter counts and hidden dense units,
//! * depth repeats every conv layer in place,
//! * resolution enlarges the input's height and width,
//! * compound applies width, then depth, then resolution.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::layers::{Activation, LayerSpec, ParamCount};

pub const NUM_CLASSES: usize = 2;

/// Default dropout after each conv/pool block.
pub const BLOCK_DROPOUT: f64 = 0.25;
/// Default dropout after the hidden dense layer.
pub const DENSE_DROPOUT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureSpec {
    pub name: String,
    /// `(H, W, C)`
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFactors {
    pub width: f64,
    pub depth: usize,
    pub resolution: f64,
}

impl ScaleFactors {
    pub const IDENTITY: ScaleFactors = ScaleFactors {
        width: 1.0,
        depth: 1,
        resolution: 1.0,
    };
}

impl Default for ScaleFactors {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// The five named experiment arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Baseline,
    Width,
    Depth,
    Resolution,
    Compound,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Baseline,
        Preset::Width,
        Preset::Depth,
        Preset::Resolution,
        Preset::Compound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Baseline => "baseline",
            Preset::Width => "width",
            Preset::Depth => "depth",
            Preset::Resolution => "resolution",
            Preset::Compound => "compound",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Factors applied to the baseline. `compound` is the published
    /// compound-scaled table: triple depth at the baseline's width and
    /// resolution.
    pub fn factors(self) -> ScaleFactors {
        let id = ScaleFactors::IDENTITY;
        match self {
            Preset::Baseline => id,
            Preset::Width => ScaleFactors { width: 2.0, ..id },
            Preset::Depth => ScaleFactors { depth: 3, ..id },
            Preset::Resolution => ScaleFactors {
                resolution: 1.25,
                ..id
            },
            Preset::Compound => ScaleFactors { depth: 3, ..id },
        }
    }

    pub fn build(self) -> Result<ArchitectureSpec> {
        let mut arch = baseline_arch().scale_compound(self.factors())?;
        arch.name = self.name().to_string();
        Ok(arch)
    }
}

/// One row of a layer summary table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSummaryRow {
    pub kind: String,
    /// Per-sample output shape, without the batch dimension.
    pub output_shape: Vec<usize>,
    pub params: usize,
    pub non_trainable: usize,
}

impl LayerSummaryRow {
    /// Keras-style shape, e.g. `(None,106,106,16)`.
    pub fn shape_text(&self) -> String {
        let dims: Vec<String> = self.output_shape.iter().map(|d| d.to_string()).collect();
        format!("(None,{})", dims.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub rows: Vec<LayerSummaryRow>,
    pub trainable: usize,
    pub non_trainable: usize,
}

/// Four blocks of [3x3 conv + ReLU, 2x2 max pool, dropout] with 16, 32, 64
/// and 128 filters on a 108x108x3 input, then flatten, Dense(256) + ReLU,
/// dropout, and a Dense(2) softmax head.
pub fn baseline_arch() -> ArchitectureSpec {
    let mut layers = Vec::new();
    for filters in [16, 32, 64, 128] {
        layers.push(LayerSpec::Conv2d {
            filters,
            kernel: 3,
            activation: Activation::Relu,
        });
        layers.push(LayerSpec::MaxPool2d { pool: 2 });
        layers.push(LayerSpec::Dropout {
            rate: BLOCK_DROPOUT,
        });
    }
    layers.extend([
        LayerSpec::Flatten,
        LayerSpec::Dense {
            units: 256,
            activation: Activation::Relu,
        },
        LayerSpec::Dropout {
            rate: DENSE_DROPOUT,
        },
        LayerSpec::Dense {
            units: NUM_CLASSES,
            activation: Activation::Softmax,
        },
    ]);
    ArchitectureSpec {
        name: "baseline".into(),
        input: [108, 108, 3],
        layers,
    }
}

fn round_even(x: f64) -> usize {
    (2.0 * (x / 2.0).round()) as usize
}

impl ArchitectureSpec {
    /// Per-layer output shapes and parameter counts.
    pub fn infer_shapes(&self) -> Result<Summary> {
        let mut shape = self.input.to_vec();
        let mut rows = Vec::with_capacity(self.layers.len());
        let (mut trainable, mut non_trainable) = (0, 0);
        for (index, layer) in self.layers.iter().enumerate() {
            let wrap = |e: Error| match e {
                Error::Shape(m) => Error::shape(format!("layer {index} ({layer}): {m}")),
                other => other,
            };
            let out = layer.output_shape(&shape).map_err(wrap)?;
            let ParamCount {
                trainable: t,
                non_trainable: nt,
            } = layer.param_count(&shape).map_err(wrap)?;
            trainable += t;
            non_trainable += nt;
            rows.push(LayerSummaryRow {
                kind: layer.display_name().to_string(),
                output_shape: out.clone(),
                params: t,
                non_trainable: nt,
            });
            shape = out;
        }
        Ok(Summary {
            rows,
            trainable,
            non_trainable,
        })
    }

    /// Shape inference plus the classifier-head invariant.
    pub fn validate(&self) -> Result<Summary> {
        if self.input.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!(
                "input shape {:?} has a zero dimension",
                self.input
            )));
        }
        let summary = self.infer_shapes()?;
        match self.layers.last() {
            Some(LayerSpec::Dense { units, .. }) if *units == NUM_CLASSES => Ok(summary),
            other => Err(Error::shape(format!(
                "last layer must be dense with {NUM_CLASSES} units, found {}",
                other.map_or("nothing".to_string(), |l| l.to_string())
            ))),
        }
    }

    pub fn total_params(&self) -> Result<usize> {
        Ok(self.infer_shapes()?.trainable)
    }

    pub fn scale_width(&self, w: f64) -> Result<ArchitectureSpec> {
        if !(w.is_finite() && w >= 1.0) {
            return Err(Error::InvalidFactor(format!("width factor must be >= 1, got {w}")));
        }
        let scale = |n: usize| ((n as f64 * w).round() as usize).max(1);
        let last = self.layers.len().saturating_sub(1);
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, layer)| match *layer {
                LayerSpec::Conv2d {
                    filters,
                    kernel,
                    activation,
                } => LayerSpec::Conv2d {
                    filters: scale(filters),
                    kernel,
                    activation,
                },
                LayerSpec::Dense { units, activation } if i != last => LayerSpec::Dense {
                    units: scale(units),
                    activation,
                },
                ref other => other.clone(),
            })
            .collect();
        Ok(ArchitectureSpec {
            name: self.name.clone(),
            input: self.input,
            layers,
        })
    }

    pub fn scale_depth(&self, d: usize) -> Result<ArchitectureSpec> {
        if d < 1 {
            return Err(Error::InvalidFactor("depth factor must be >= 1".into()));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let copies = if matches!(layer, LayerSpec::Conv2d { .. }) { d } else { 1 };
            layers.extend(std::iter::repeat(layer.clone()).take(copies));
        }
        Ok(ArchitectureSpec {
            name: self.name.clone(),
            input: self.input,
            layers,
        })
    }

    /// Multiplies input height and width by `r`, rounding to the nearest even
    /// integer (halves round up). Factors below 1 shrink the input; the result
    /// must still shape-infer.
    pub fn scale_resolution(&self, r: f64) -> Result<ArchitectureSpec> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidFactor(format!(
                "resolution factor must be positive, got {r}"
            )));
        }
        let [h, w, c] = self.input;
        let input = [round_even(h as f64 * r), round_even(w as f64 * r), c];
        let scaled = ArchitectureSpec {
            name: self.name.clone(),
            input,
            layers: self.layers.clone(),
        };
        if input[0] == 0 || input[1] == 0 {
            return Err(Error::shape(format!(
                "resolution factor {r} collapses the {h}x{w} input to {}x{}",
                input[0], input[1]
            )));
        }
        scaled.infer_shapes()?;
        Ok(scaled)
    }

    /// Replaces the input resolution outright.
    pub fn with_input(&self, height: usize, width: usize) -> Result<ArchitectureSpec> {
        let scaled = ArchitectureSpec {
            name: self.name.clone(),
            input: [height, width, self.input[2]],
            layers: self.layers.clone(),
        };
        scaled.validate()?;
        Ok(scaled)
    }

    pub fn scale_compound(&self, f: ScaleFactors) -> Result<ArchitectureSpec> {
        self.scale_width(f.width)?
            .scale_depth(f.depth)?
            .scale_resolution(f.resolution)
    }

    /// Architecture document in the TOML-based text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let [h, w, c] = self.input;
        writeln!(out, "name = {}", toml_string(&self.name)).unwrap();
        writeln!(out, "input = [{h}, {w}, {c}]").unwrap();
        for layer in &self.layers {
            writeln!(out, "\n[[layer]]").unwrap();
            writeln!(out, "type = \"{}\"", layer.kind()).unwrap();
            match *layer {
                LayerSpec::Conv2d {
                    filters,
                    kernel,
                    activation,
                } => {
                    writeln!(out, "filters = {filters}").unwrap();
                    writeln!(out, "kernel = {kernel}").unwrap();
                    writeln!(out, "activation = \"{}\"", activation.name()).unwrap();
                }
                LayerSpec::MaxPool2d { pool } => writeln!(out, "pool = {pool}").unwrap(),
                LayerSpec::Dropout { rate } => writeln!(out, "rate = {rate:?}").unwrap(),
                LayerSpec::Dense { units, activation } => {
                    writeln!(out, "units = {units}").unwrap();
                    writeln!(out, "activation = \"{}\"", activation.name()).unwrap();
                }
                LayerSpec::BatchNorm | LayerSpec::Flatten => {}
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<ArchitectureSpec> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let location = e
                .span()
                .map(|s| format!("line {}", line_of(text, s.start)))
                .unwrap_or_else(|| "document".into());
            Error::parse(location, e.message().to_string())
        })?;
        let layer_lines = layer_header_lines(text);

        for key in doc.keys() {
            if !matches!(key.as_str(), "name" | "input" | "layer") {
                return Err(Error::parse("document", format!("unknown key `{key}`")));
            }
        }
        let name = match doc.get("name") {
            None => String::new(),
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(Error::parse("field `name`", "expected a string")),
        };
        let input = parse_input(doc.get("input"))?;
        let layers = match doc.get("layer") {
            None => Vec::new(),
            Some(toml::Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    let location = match layer_lines.get(i) {
                        Some(line) => format!("line {line} (layer {i})"),
                        None => format!("layer {i}"),
                    };
                    match item {
                        toml::Value::Table(t) => parse_layer(t, &location),
                        _ => Err(Error::parse(location, "expected a [[layer]] table")),
                    }
                })
                .collect::<Result<Vec<_>>>()?,
            Some(_) => return Err(Error::parse("field `layer`", "expected [[layer]] tables")),
        };
        Ok(ArchitectureSpec {
            name,
            input,
            layers,
        })
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn layer_header_lines(text: &str) -> Vec<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim() == "[[layer]]")
        .map(|(i, _)| i + 1)
        .collect()
}

fn parse_input(value: Option<&toml::Value>) -> Result<[usize; 3]> {
    let err = |m: &str| Error::parse("field `input`", m.to_string());
    let items = match value {
        None => return Err(err("missing")),
        Some(toml::Value::Array(a)) => a,
        Some(_) => return Err(err("expected [H, W, C]")),
    };
    if items.len() != 3 {
        return Err(err("expected exactly three dimensions [H, W, C]"));
    }
    let mut dims = [0usize; 3];
    for (d, v) in dims.iter_mut().zip(items) {
        *d = match v.as_integer() {
            Some(n) if n >= 1 => n as usize,
            _ => return Err(err("dimensions must be positive integers")),
        };
    }
    Ok(dims)
}

fn parse_layer(t: &toml::Table, location: &str) -> Result<LayerSpec> {
    let perr = |m: String| Error::parse(location.to_string(), m);
    let kind = match t.get("type") {
        Some(toml::Value::String(s)) => s.as_str(),
        Some(_) => return Err(perr("field `type` must be a string".into())),
        None => return Err(perr("missing field `type`".into())),
    };
    let allowed: &[&str] = match kind {
        "conv2d" => &["type", "filters", "kernel", "activation"],
        "maxpool2d" => &["type", "pool"],
        "dropout" => &["type", "rate"],
        "batchnorm" | "flatten" => &["type"],
        "dense" => &["type", "units", "activation"],
        other => return Err(perr(format!("unknown layer kind `{other}`"))),
    };
    if let Some(extra) = t.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(perr(format!("field `{extra}` does not apply to {kind}")));
    }
    let positive = |field: &str| -> Result<usize> {
        match t.get(field) {
            None => Err(perr(format!("missing field `{field}`"))),
            Some(v) => match v.as_integer() {
                Some(n) if n >= 1 => Ok(n as usize),
                _ => Err(perr(format!("field `{field}` must be a positive integer"))),
            },
        }
    };
    let activation = |default: Activation| -> Result<Activation> {
        match t.get("activation") {
            None => Ok(default),
            Some(toml::Value::String(s)) => Activation::from_name(s)
                .ok_or_else(|| perr(format!("field `activation`: unknown activation `{s}`"))),
            Some(_) => Err(perr("field `activation` must be a string".into())),
        }
    };
    let spec = match kind {
        "conv2d" => LayerSpec::Conv2d {
            filters: positive("filters")?,
            kernel: positive("kernel")?,
            activation: activation(Activation::None)?,
        },
        "maxpool2d" => LayerSpec::MaxPool2d {
            pool: positive("pool")?,
        },
        "dropout" => {
            let rate = match t.get("rate") {
                Some(toml::Value::Float(f)) => *f,
                Some(toml::Value::Integer(i)) => *i as f64,
                Some(_) => return Err(perr("field `rate` must be a number".into())),
                None => return Err(perr("missing field `rate`".into())),
            };
            if !(0.0..1.0).contains(&rate) {
                return Err(perr(format!("field `rate` must lie in [0, 1), got {rate}")));
            }
            LayerSpec::Dropout { rate }
        }
        "batchnorm" => LayerSpec::BatchNorm,
        "flatten" => LayerSpec::Flatten,
        _ => LayerSpec::Dense {
            units: positive("units")?,
            activation: activation(Activation::None)?,
        },
    };
    spec.validate().map_err(|e| perr(e.to_string()))?;
    Ok(spec)
}

pub fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

impl Summary {
    /// Fixed-width "Layer / Output Shape / Parameters" table with totals.
    pub fn to_table(&self) -> String {
        let kind_w = self
            .rows
            .iter()
            .map(|r| r.kind.len())
            .chain(["Layer".len()])
            .max()
            .unwrap_or(5)
            + 4;
        let shape_w = self
            .rows
            .iter()
            .map(|r| r.shape_text().len())
            .chain(["Output Shape".len()])
            .max()
            .unwrap_or(12)
            + 4;
        let mut out = String::new();
        writeln!(out, "{:<kind_w$}{:<shape_w$}{}", "Layer", "Output Shape", "Parameters").unwrap();
        writeln!(out, "{}", "=".repeat(kind_w + shape_w + "Parameters".len())).unwrap();
        for row in &self.rows {
            writeln!(out, "{:<kind_w$}{:<shape_w$}{}", row.kind, row.shape_text(), row.params).unwrap();
        }
        writeln!(out, "{}", "=".repeat(kind_w + shape_w + "Parameters".len())).unwrap();
        writeln!(out, "Total parameters: {}", thousands(self.trainable)).unwrap();
        if self.non_trainable > 0 {
            writeln!(out, "Non-trainable parameters: {}", thousands(self.non_trainable)).unwrap();
        }
        out
    }
}
