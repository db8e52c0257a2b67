use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{output_extent, Padding};

/// Smallest accepted input side; keeps both stride-2 stages well defined.
pub const MIN_INPUT_SIDE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Depthwise,
    Pointwise,
    Relu,
    Gap,
    Dense,
    Softmax,
}

impl LayerKind {
    pub fn has_parameters(self) -> bool {
        matches!(self, Self::Conv | Self::Depthwise | Self::Pointwise | Self::Dense)
    }

    pub fn code(self) -> u8 {
        match self {
            Self::Conv => 0,
            Self::Depthwise => 1,
            Self::Pointwise => 2,
            Self::Relu => 3,
            Self::Gap => 4,
            Self::Dense => 5,
            Self::Softmax => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Self::Conv,
            1 => Self::Depthwise,
            2 => Self::Pointwise,
            3 => Self::Relu,
            4 => Self::Gap,
            5 => Self::Dense,
            6 => Self::Softmax,
            _ => return None,
        })
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Conv => "conv",
            Self::Depthwise => "depthwise",
            Self::Pointwise => "pointwise",
            Self::Relu => "relu",
            Self::Gap => "gap",
            Self::Dense => "dense",
            Self::Softmax => "softmax",
        };
        f.write_str(name)
    }
}

/// One layer of the network.
///
/// `filters` is the output width: filter count for convolutions, channel
/// count for depthwise (must equal its input), unit count for dense layers,
/// and 0 for layers without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub filters: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: Padding,
}

impl LayerSpec {
    fn plain(kind: LayerKind) -> Self {
        Self {
            kind,
            filters: 0,
            kernel_size: 0,
            stride: 0,
            padding: Padding::Same,
        }
    }

    pub fn conv(filters: usize, kernel_size: usize, stride: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            filters,
            kernel_size,
            stride,
            padding: Padding::Same,
        }
    }

    pub fn depthwise(channels: usize, kernel_size: usize, stride: usize) -> Self {
        Self {
            kind: LayerKind::Depthwise,
            filters: channels,
            kernel_size,
            stride,
            padding: Padding::Same,
        }
    }

    pub fn pointwise(filters: usize, stride: usize) -> Self {
        Self {
            kind: LayerKind::Pointwise,
            filters,
            kernel_size: 1,
            stride,
            padding: Padding::Same,
        }
    }

    pub fn dense(units: usize) -> Self {
        Self {
            kind: LayerKind::Dense,
            filters: units,
            kernel_size: 0,
            stride: 0,
            padding: Padding::Same,
        }
    }

    pub fn relu() -> Self {
        Self::plain(LayerKind::Relu)
    }

    pub fn gap() -> Self {
        Self::plain(LayerKind::Gap)
    }

    pub fn softmax() -> Self {
        Self::plain(LayerKind::Softmax)
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }
}

/// Shapes of one parameterized layer's weight and bias tensors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamShapes {
    pub weight: Vec<usize>,
    pub bias: Vec<usize>,
}

impl ParamShapes {
    pub fn count(&self) -> usize {
        self.weight.iter().product::<usize>() + self.bias.iter().product::<usize>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flow {
    Spatial(usize),
    Flat(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
    pub input_channels: usize,
    pub num_classes: usize,
}

/// The published speckle classifier: 3×3/2 conv, depthwise 3×3, two
/// pointwise stages, global average pooling and a four-layer dense head.
pub fn canonical_spec() -> ModelSpec {
    ModelSpec::separable(1, 32, (128, 256), &[512, 256, 128], 59)
}

impl ModelSpec {
    /// Conv(stem, 3×3, /2) → depthwise(3×3) → pointwise(first) →
    /// pointwise(second, /2) → GAP → dense head → dense(num_classes) →
    /// softmax, with ReLU after every hidden layer.
    pub fn separable(
        input_channels: usize,
        stem: usize,
        (first, second): (usize, usize),
        head: &[usize],
        num_classes: usize,
    ) -> Self {
        let mut layers = vec![
            LayerSpec::conv(stem, 3, 2),
            LayerSpec::relu(),
            LayerSpec::depthwise(stem, 3, 1),
            LayerSpec::relu(),
            LayerSpec::pointwise(first, 1),
            LayerSpec::relu(),
            LayerSpec::pointwise(second, 2),
            LayerSpec::relu(),
            LayerSpec::gap(),
        ];
        for &units in head {
            layers.push(LayerSpec::dense(units));
            layers.push(LayerSpec::relu());
        }
        layers.push(LayerSpec::dense(num_classes));
        layers.push(LayerSpec::softmax());
        Self {
            layers,
            input_channels,
            num_classes,
        }
    }

    /// Checks the channel chain and returns the parameter shapes per layer.
    pub fn param_shapes(&self) -> Result<Vec<Option<ParamShapes>>> {
        if self.input_channels == 0 {
            return Err(Error::InvalidSpec("input_channels must be positive".into()));
        }
        let mut flow = Flow::Spatial(self.input_channels);
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |msg: String| Error::InvalidSpec(format!("layer {i} ({}): {msg}", layer.kind));
            if layer.kind.has_parameters() && layer.filters == 0 {
                return Err(bad("width must be positive".into()));
            }
            if matches!(
                layer.kind,
                LayerKind::Conv | LayerKind::Depthwise | LayerKind::Pointwise
            ) {
                if layer.stride == 0 {
                    return Err(bad("stride must be positive".into()));
                }
                if layer.kernel_size % 2 == 0 {
                    return Err(bad(format!("kernel size {} must be odd", layer.kernel_size)));
                }
            }
            let (next, params) = match (layer.kind, flow) {
                (LayerKind::Conv | LayerKind::Pointwise, Flow::Spatial(c)) => {
                    if layer.kind == LayerKind::Pointwise && layer.kernel_size != 1 {
                        return Err(bad("pointwise kernel must be 1".into()));
                    }
                    let k = layer.kernel_size;
                    let shapes = ParamShapes {
                        weight: vec![k, k, c, layer.filters],
                        bias: vec![layer.filters],
                    };
                    (Flow::Spatial(layer.filters), Some(shapes))
                }
                (LayerKind::Depthwise, Flow::Spatial(c)) => {
                    if layer.filters != c {
                        return Err(bad(format!("channel count {} != input {c}", layer.filters)));
                    }
                    let k = layer.kernel_size;
                    let shapes = ParamShapes {
                        weight: vec![k, k, c],
                        bias: vec![c],
                    };
                    (Flow::Spatial(c), Some(shapes))
                }
                (LayerKind::Gap, Flow::Spatial(c)) => (Flow::Flat(c), None),
                (LayerKind::Dense, Flow::Flat(n)) => {
                    let shapes = ParamShapes {
                        weight: vec![n, layer.filters],
                        bias: vec![layer.filters],
                    };
                    (Flow::Flat(layer.filters), Some(shapes))
                }
                (LayerKind::Relu, f) => (f, None),
                (LayerKind::Softmax, Flow::Flat(n)) => {
                    if i + 1 != self.layers.len() {
                        return Err(bad("softmax must be the final layer".into()));
                    }
                    (Flow::Flat(n), None)
                }
                (kind, f) => return Err(bad(format!("{kind} cannot follow {f:?}"))),
            };
            flow = next;
            shapes.push(params);
        }
        match flow {
            Flow::Flat(n) if n == self.num_classes => Ok(shapes),
            _ if self.layers.is_empty() => Ok(shapes),
            other => Err(Error::InvalidSpec(format!(
                "network ends in {other:?}, expected {} class scores",
                self.num_classes
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.param_shapes().map(drop)
    }

    /// Trainable parameter count per layer (0 for parameter-free layers).
    pub fn layer_parameter_counts(&self) -> Result<Vec<usize>> {
        Ok(self
            .param_shapes()?
            .iter()
            .map(|s| s.as_ref().map_or(0, ParamShapes::count))
            .collect())
    }

    /// Shape produced by each layer for an `h × w` input.
    pub fn output_shapes(&self, h: usize, w: usize) -> Result<Vec<Vec<usize>>> {
        self.validate()?;
        if h < MIN_INPUT_SIDE || w < MIN_INPUT_SIDE {
            return Err(Error::InvalidShape(format!(
                "input {h}x{w} is below the {MIN_INPUT_SIDE}x{MIN_INPUT_SIDE} minimum"
            )));
        }
        let mut shape = vec![h, w, self.input_channels];
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = match layer.kind {
                LayerKind::Conv | LayerKind::Depthwise | LayerKind::Pointwise => {
                    let k = layer.kernel_size;
                    let extent = |n| output_extent(n, k, layer.stride, layer.padding).map(|(o, _)| o);
                    let (Some(oh), Some(ow)) = (extent(shape[0]), extent(shape[1])) else {
                        return Err(Error::InvalidShape(format!(
                            "input {h}x{w} too small for {}",
                            layer.kind
                        )));
                    };
                    vec![oh, ow, layer.filters]
                }
                LayerKind::Gap => vec![shape[2]],
                LayerKind::Dense => vec![layer.filters],
                LayerKind::Relu | LayerKind::Softmax => shape,
            };
            out.push(shape.clone());
        }
        Ok(out)
    }
}

/// Total trainable parameters; independent of input resolution.
pub fn parameter_count(spec: &ModelSpec) -> Result<usize> {
    Ok(spec.layer_parameter_counts()?.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_counts() {
        let spec = canonical_spec();
        assert_eq!(spec.num_classes, 59);
        let counts: Vec<usize> = spec
            .layer_parameter_counts()
            .unwrap()
            .into_iter()
            .filter(|&c| c > 0)
            .collect();
        assert_eq!(counts, [320, 320, 4_224, 33_024, 131_584, 131_328, 32_896, 7_611]);
        assert_eq!(parameter_count(&spec).unwrap(), 341_307);
    }

    #[test]
    fn empty_spec_has_no_parameters() {
        let spec = ModelSpec {
            layers: vec![],
            input_channels: 1,
            num_classes: 0,
        };
        assert_eq!(parameter_count(&spec).unwrap(), 0);
    }

    #[test]
    fn broken_chains_rejected() {
        let mut spec = canonical_spec();
        spec.layers[2].filters = 16;
        assert!(parameter_count(&spec).is_err());

        let mut spec = canonical_spec();
        spec.num_classes = 10;
        assert!(spec.validate().is_err());

        let mut spec = canonical_spec();
        spec.layers.remove(8); // GAP
        assert!(spec.validate().is_err());
    }

    #[test]
    fn gap_width_is_256() {
        let shapes = canonical_spec().output_shapes(512, 512).unwrap();
        assert_eq!(shapes[8], [256]);
        assert_eq!(canonical_spec().output_shapes(128, 128).unwrap()[8], [256]);
    }

    #[test]
    fn kind_codes_round_trip() {
        for code in 0..7 {
            assert_eq!(LayerKind::from_code(code).unwrap().code(), code);
        }
        assert!(LayerKind::from_code(7).is_none());
    }
}
