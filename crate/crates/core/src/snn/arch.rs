//! Declarative network architectures in bracket notation, e.g.
//! `16c5-bn-2p-0.2d-32c5-bn-2p-0.2d-1024`:
//!
//! | token | meaning |
//! |---|---|
//! | `16c5` | convolution, 16 output channels, 5×5 kernel, stride 1 |
//! | `bn` | batch normalization of the preceding convolution's drive |
//! | `2p` | 2×2 max-pool with stride 2 |
//! | `0.2d` | dropout with rate 0.2 |
//! | `1024` or `1024fc` | fully connected layer of 1024 units |
//!
//! Every convolution and fully connected layer feeds a population of LIF
//! neurons. Padding is a network-wide setting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Valid,
    Same,
}

impl FromStr for Padding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valid" => Ok(Padding::Valid),
            "same" => Ok(Padding::Same),
            other => Err(Error::Config(format!("unknown padding mode {other:?}"))),
        }
    }
}

impl fmt::Display for Padding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Padding::Valid => "valid",
            Padding::Same => "same",
        })
    }
}

/// Channel-major spatial shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn flat(n: usize) -> Self {
        Self::new(n, 1, 1)
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn spatial(&self) -> usize {
        self.height * self.width
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    BatchNorm,
    MaxPool {
        window: usize,
    },
    Dropout {
        rate: f64,
    },
    Dense {
        units: usize,
    },
}

impl LayerSpec {
    /// Connective layers own weights and feed a LIF population.
    pub fn is_connective(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Dense { .. })
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride: 1,
            } => write!(f, "{out_channels}c{kernel}"),
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
            } => write!(f, "{out_channels}c{kernel}s{stride}"),
            LayerSpec::BatchNorm => f.write_str("bn"),
            LayerSpec::MaxPool { window } => write!(f, "{window}p"),
            LayerSpec::Dropout { rate } => write!(f, "{rate}d"),
            LayerSpec::Dense { units } => write!(f, "{units}"),
        }
    }
}

fn parse_token(tok: &str) -> Result<LayerSpec> {
    let bad = || Error::Config(format!("cannot parse architecture token {tok:?}"));
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
    if tok == "bn" {
        return Ok(LayerSpec::BatchNorm);
    }
    if let Some(w) = tok.strip_suffix('p') {
        return Ok(LayerSpec::MaxPool { window: num(w)? });
    }
    if let Some(r) = tok.strip_suffix('d') {
        let rate: f64 = r.parse().map_err(|_| bad())?;
        return Ok(LayerSpec::Dropout { rate });
    }
    if let Some(u) = tok.strip_suffix("fc") {
        return Ok(LayerSpec::Dense { units: num(u)? });
    }
    if let Some((c, rest)) = tok.split_once('c') {
        let (k, s) = match rest.split_once('s') {
            Some((k, s)) => (k, num(s)?),
            None => (rest, 1),
        };
        return Ok(LayerSpec::Conv {
            out_channels: num(c)?,
            kernel: num(k)?,
            stride: s,
        });
    }
    Ok(LayerSpec::Dense { units: num(tok)? })
}

/// An input shape, a layer list and the global padding mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    input: Shape,
    padding: Padding,
    layers: Vec<LayerSpec>,
}

/// Geometry of one convolution after shape inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub input: Shape,
    pub output: Shape,
    pub kernel: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

fn conv_out(len: usize, kernel: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Valid => (len >= kernel).then(|| ((len - kernel) / stride + 1, 0)),
        Padding::Same => {
            let out = len.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(len);
            Some((out, total / 2))
        }
    }
}

/// Shape-resolved view of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ResolvedLayer {
    pub spec: LayerSpec,
    pub input: Shape,
    pub output: Shape,
    pub conv: Option<ConvGeometry>,
}

impl Architecture {
    pub fn new(input: Shape, padding: Padding, layers: Vec<LayerSpec>) -> Result<Self> {
        let arch = Self {
            input,
            padding,
            layers,
        };
        arch.resolve()?;
        Ok(arch)
    }

    /// Parses bracket notation; surrounding `[ ]` and spaces are ignored.
    pub fn parse(spec: &str, input: Shape, padding: Padding) -> Result<Self> {
        let cleaned: String = spec
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '[' && *c != ']')
            .collect();
        let layers = cleaned
            .split('-')
            .filter(|t| !t.is_empty())
            .map(parse_token)
            .collect::<Result<Vec<_>>>()?;
        Self::new(input, padding, layers)
    }

    pub fn input(&self) -> Shape {
        self.input
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Units in the final (output) LIF population.
    pub fn output_units(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Dense { units }) => *units,
            _ => unreachable!("validated architectures end in a dense layer"),
        }
    }

    /// Bracket notation without the padding flag.
    pub fn notation(&self) -> String {
        self.layers
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("-")
    }

    pub(crate) fn resolve(&self) -> Result<Vec<ResolvedLayer>> {
        let cfg = |msg: String| Error::Config(format!("{}: {msg}", self.notation()));
        if self.input.is_empty() {
            return Err(cfg("empty input shape".into()));
        }
        if !matches!(self.layers.last(), Some(LayerSpec::Dense { .. })) {
            return Err(cfg(
                "architecture must end with a fully connected layer".into()
            ));
        }
        let mut shape = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        // what the previous layer was, for placement rules
        let mut after_conv = false;
        let mut has_population = false;
        let mut flattened = false;
        for (i, &spec) in self.layers.iter().enumerate() {
            let input = shape;
            let mut conv = None;
            match spec {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    stride,
                } => {
                    if flattened {
                        return Err(cfg(format!("layer {i}: convolution after a dense layer")));
                    }
                    if out_channels == 0 || kernel == 0 || stride == 0 {
                        return Err(cfg(format!("layer {i}: zero-sized convolution")));
                    }
                    let (h, pt) =
                        conv_out(shape.height, kernel, stride, self.padding).ok_or_else(|| {
                            cfg(format!("layer {i}: kernel larger than input {shape}"))
                        })?;
                    let (w, pl) =
                        conv_out(shape.width, kernel, stride, self.padding).ok_or_else(|| {
                            cfg(format!("layer {i}: kernel larger than input {shape}"))
                        })?;
                    shape = Shape::new(out_channels, h, w);
                    conv = Some(ConvGeometry {
                        input,
                        output: shape,
                        kernel,
                        stride,
                        pad_top: pt,
                        pad_left: pl,
                    });
                }
                LayerSpec::BatchNorm => {
                    if !after_conv {
                        return Err(cfg(format!(
                            "layer {i}: batchnorm must directly follow a convolution"
                        )));
                    }
                }
                LayerSpec::MaxPool { window } => {
                    if !has_population || flattened {
                        return Err(cfg(format!(
                            "layer {i}: max-pool needs a spatial spiking input"
                        )));
                    }
                    if window == 0 || shape.height < window || shape.width < window {
                        return Err(cfg(format!("layer {i}: pool window {window} on {shape}")));
                    }
                    shape = Shape::new(shape.channels, shape.height / window, shape.width / window);
                }
                LayerSpec::Dropout { rate } => {
                    if !has_population {
                        return Err(cfg(format!("layer {i}: dropout needs a spiking input")));
                    }
                    if !(0.0..1.0).contains(&rate) {
                        return Err(cfg(format!(
                            "layer {i}: dropout rate {rate} outside [0, 1)"
                        )));
                    }
                }
                LayerSpec::Dense { units } => {
                    if units == 0 {
                        return Err(cfg(format!("layer {i}: zero-unit dense layer")));
                    }
                    shape = Shape::flat(units);
                    flattened = true;
                }
            }
            after_conv = matches!(spec, LayerSpec::Conv { .. });
            has_population |= spec.is_connective();
            out.push(ResolvedLayer {
                spec,
                input,
                output: shape,
                conv,
            });
        }
        Ok(out)
    }

    /// LIF populations, each measured at the resolution it transmits at
    /// (after any max-pool that follows it).
    pub fn population_shapes(&self) -> Vec<Shape> {
        let resolved = self
            .resolve()
            .expect("architecture validated at construction");
        let mut pops: Vec<Shape> = Vec::new();
        for layer in &resolved {
            match layer.spec {
                LayerSpec::Conv { .. } | LayerSpec::Dense { .. } => pops.push(layer.output),
                LayerSpec::MaxPool { .. } => {
                    *pops.last_mut().expect("pool follows a population") = layer.output
                }
                _ => {}
            }
        }
        pops
    }

    /// Total LIF neurons, convolutional populations counted after pooling.
    pub fn count_neurons(&self) -> usize {
        self.population_shapes().iter().map(Shape::len).sum()
    }

    /// Weight plus bias elements of every convolution and dense layer.
    /// Batchnorm affine parameters are not included.
    pub fn count_parameters(&self) -> usize {
        self.resolve()
            .expect("architecture validated at construction")
            .iter()
            .map(|l| match l.spec {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    ..
                } => out_channels * l.input.channels * kernel * kernel + out_channels,
                LayerSpec::Dense { units } => units * l.input.len() + units,
                _ => 0,
            })
            .sum()
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] on {} ({})",
            self.notation(),
            self.input,
            self.padding
        )
    }
}

/// Which of the three compared model shapes to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariant {
    /// Hyperdimensional output layer of `D` neurons.
    Hdc,
    /// Same depth, one-hot output layer.
    SameDepth,
    /// HDC body plus an appended one-hot layer.
    Deeper,
}

const DVS_GESTURE_BODY: &str = "16c5-bn-2p-0.2d-32c5-bn-2p-0.2d";
const SL_ANIMALS_BODY: &str = "8c5-2p-16c5-2p-32c5-2p-25";

fn preset(
    body: &str,
    variant: ModelVariant,
    dims: usize,
    classes: usize,
    padding: Padding,
) -> Architecture {
    let head = match variant {
        ModelVariant::Hdc => format!("{dims}"),
        ModelVariant::SameDepth => format!("{classes}"),
        ModelVariant::Deeper => format!("{dims}-{classes}"),
    };
    Architecture::parse(&format!("{body}-{head}"), Shape::new(2, 32, 32), padding)
        .expect("preset architectures are valid")
}

/// DvsGesture models on 2×32×32 input with valid padding; 11 classes.
pub fn dvs_gesture(variant: ModelVariant, dims: usize) -> Architecture {
    preset(DVS_GESTURE_BODY, variant, dims, 11, Padding::Valid)
}

/// SL-Animals-DVS models on 2×32×32 input with same padding; 19 classes.
pub fn sl_animals(variant: ModelVariant, dims: usize) -> Architecture {
    preset(SL_ANIMALS_BODY, variant, dims, 19, Padding::Same)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_round_trip() {
        let a = Architecture::parse(
            "[16c5 - bn - 2p - 0.2d - 32c5 - bn - 2p - 0.2d - 1024]",
            Shape::new(2, 32, 32),
            Padding::Valid,
        )
        .unwrap();
        assert_eq!(a.notation(), "16c5-bn-2p-0.2d-32c5-bn-2p-0.2d-1024");
        assert_eq!(a.output_units(), 1024);
        let b =
            Architecture::parse("8c5-2p-25fc-10", Shape::new(2, 32, 32), Padding::Same).unwrap();
        assert_eq!(b.notation(), "8c5-2p-25-10");
    }

    #[test]
    fn invalid_architectures_rejected() {
        let s = Shape::new(2, 8, 8);
        for bad in [
            "16c5-bn-2p",
            "bn-10",
            "2p-10",
            "10-4c3-2",
            "4c9-2",
            "4c3-1.5d-2",
            "x-3",
            "",
        ] {
            assert!(
                Architecture::parse(bad, s, Padding::Valid).is_err(),
                "{bad} should be rejected"
            );
        }
    }

    #[test]
    fn single_dense_layer() {
        let a = Architecture::parse("11", Shape::new(2, 4, 4), Padding::Valid).unwrap();
        assert_eq!(a.count_neurons(), 11);
        assert_eq!(a.count_parameters(), 32 * 11 + 11);
    }

    #[test]
    fn dvs_gesture_layer_arithmetic() {
        let a = dvs_gesture(ModelVariant::SameDepth, 0);
        assert_eq!(
            a.population_shapes(),
            vec![
                Shape::new(16, 14, 14),
                Shape::new(32, 5, 5),
                Shape::flat(11)
            ]
        );
        // 816 + 12,832 + 8,811
        assert_eq!(a.count_parameters(), 22_459);
    }

    #[test]
    fn same_padding_keeps_resolution() {
        let a = sl_animals(ModelVariant::SameDepth, 0);
        assert_eq!(
            a.population_shapes(),
            vec![
                Shape::new(8, 16, 16),
                Shape::new(16, 8, 8),
                Shape::new(32, 4, 4),
                Shape::flat(25),
                Shape::flat(19)
            ]
        );
    }
}
