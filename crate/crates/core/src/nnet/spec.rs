use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Network topology: a stack of 2×1 convolutions with ReLU, then ReLU dense
/// layers, then `classes` sigmoid outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Microphones, the row count of the input phase map.
    pub mics: usize,
    /// Frequency bins per phase map.
    pub bins: usize,
    /// Filter count of each convolution layer.
    pub conv_filters: Vec<usize>,
    /// Widths of the hidden dense layers.
    pub dense: Vec<usize>,
    pub classes: usize,
    pub dropout: f64,
}

/// One parameterized layer in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerShape {
    Conv { filters: usize, channels: usize, rows_in: usize },
    Dense { inputs: usize, outputs: usize },
}

impl ModelSpec {
    /// `mics - 1` convolution layers of 64 filters and two dense layers of 512.
    pub fn standard(mics: usize, bins: usize, classes: usize) -> Self {
        Self {
            mics,
            bins,
            conv_filters: vec![64; mics.saturating_sub(1)],
            dense: vec![512, 512],
            classes,
            dropout: 0.5,
        }
    }

    pub fn conv_layers(&self) -> usize {
        self.conv_filters.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mics < 2 || self.bins == 0 || self.classes == 0 {
            return Err(Error::invalid("model needs mics >= 2, bins >= 1 and classes >= 1"));
        }
        if self.conv_layers() == 0 {
            return Err(Error::invalid("model needs at least one convolution layer"));
        }
        if self.conv_layers() > self.mics - 1 {
            return Err(Error::invalid(format!(
                "{} convolution layers requested but at most {} fit {} microphones",
                self.conv_layers(),
                self.mics - 1,
                self.mics
            )));
        }
        if self.conv_filters.iter().chain(&self.dense).any(|&w| w == 0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout rate {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Feature count after flattening the last convolution output.
    pub fn flat_features(&self) -> usize {
        let rows = self.mics - self.conv_layers();
        self.conv_filters.last().copied().unwrap_or(1) * rows * self.bins
    }

    pub fn input_len(&self) -> usize {
        self.mics * self.bins
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut out = Vec::new();
        let mut channels = 1;
        for (i, &f) in self.conv_filters.iter().enumerate() {
            out.push(LayerShape::Conv { filters: f, channels, rows_in: self.mics - i });
            channels = f;
        }
        let mut inputs = self.flat_features();
        for &w in self.dense.iter().chain(std::iter::once(&self.classes)) {
            out.push(LayerShape::Dense { inputs, outputs: w });
            inputs = w;
        }
        out
    }

    /// Weight and bias shapes in declaration order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.layers()
            .into_iter()
            .flat_map(|l| match l {
                LayerShape::Conv { filters, channels, .. } => [vec![filters, channels, 2, 1], vec![filters]],
                LayerShape::Dense { inputs, outputs } => [vec![outputs, inputs], vec![outputs]],
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }

    /// `key=value` lines, as stored in model files.
    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        format!(
            "mics={}\nbins={}\nconv_filters={}\ndense={}\nclasses={}\ndropout={}\n",
            self.mics,
            self.bins,
            list(&self.conv_filters),
            list(&self.dense),
            self.classes,
            self.dropout
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields = std::collections::BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format(format!("bad model spec line {line:?}")))?;
            if fields.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Format(format!("duplicate model spec key {k:?}")));
            }
        }
        let mut take = |key: &str| fields.remove(key).ok_or_else(|| Error::Format(format!("model spec lacks {key:?}")));
        let num = |s: String| s.parse::<usize>().map_err(|e| Error::Format(format!("{s:?}: {e}")));
        let list = |s: String| -> Result<Vec<usize>> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',').map(|p| num(p.trim().to_string())).collect()
        };
        let spec = Self {
            mics: num(take("mics")?)?,
            bins: num(take("bins")?)?,
            conv_filters: list(take("conv_filters")?)?,
            dense: list(take("dense")?)?,
            classes: num(take("classes")?)?,
            dropout: {
                let s = take("dropout")?;
                s.parse().map_err(|e| Error::Format(format!("{s:?}: {e}")))?
            },
        };
        if let Some(k) = fields.keys().next() {
            return Err(Error::Format(format!("unknown model spec key {k:?}")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_four_mic() {
        let s = ModelSpec::standard(4, 129, 37);
        assert_eq!(s.conv_layers(), 3);
        assert_eq!(s.flat_features(), 64 * 129);
        s.validate().unwrap();
    }

    #[test]
    fn too_many_conv_layers() {
        let mut s = ModelSpec::standard(4, 129, 13);
        s.conv_filters = vec![8; 4];
        assert!(s.validate().is_err());
    }

    #[test]
    fn last_conv_leaves_vectors() {
        for m in [3, 4, 6, 8] {
            let mut s = ModelSpec::standard(m, 17, 5);
            s.conv_filters = vec![4; m - 1];
            assert_eq!(s.mics - s.conv_layers(), 1);
        }
    }

    #[test]
    fn param_count_formula() {
        let s = ModelSpec { mics: 4, bins: 10, conv_filters: vec![3, 5], dense: vec![7], classes: 2, dropout: 0.0 };
        let expected = (3 * 2 + 3) + (5 * 3 * 2 + 5) + (5 * 2 * 10 * 7 + 7) + (7 * 2 + 2);
        assert_eq!(s.param_count(), expected);
    }

    #[test]
    fn fewer_conv_layers_more_parameters() {
        for m in [4, 6, 8] {
            let counts: Vec<usize> = (2..m)
                .map(|c| {
                    let mut s = ModelSpec::standard(m, 129, 13);
                    s.conv_filters = vec![64; c];
                    s.param_count()
                })
                .collect();
            assert!(counts.windows(2).all(|w| w[0] > w[1]), "{counts:?}");
        }
    }

    #[test]
    fn text_round_trip() {
        let s = ModelSpec::standard(6, 129, 37);
        assert_eq!(ModelSpec::from_text(&s.to_text()).unwrap(), s);
        assert!(ModelSpec::from_text("mics=4\n").is_err());
        assert!(ModelSpec::from_text(&(s.to_text() + "extra=1\n")).is_err());
    }
}
