//! Reader and writer for the NNet text format used by the public ACAS Xu
//! networks.
//!
//! Layout after the `//` comment block:
//!
//! ```text
//! numLayers, inputSize, outputSize, maxLayerSize,
//! size_0, size_1, ..., size_numLayers,
//! 0,
//! input mins (inputSize values),
//! input maxes (inputSize values),
//! means (inputSize + 1 values),
//! ranges (inputSize + 1 values),
//! for each layer: one line per weight row, then one line per bias
//! ```
//!
//! The format has no activation field. Networks written here carry an extra
//! `// activation: <name>` comment; files without it are read as ReLU.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Layer, Network, Normalization};
use crate::error::{RepairError, Result};

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    /// Next non-empty data line as (1-based line number, values).
    fn next_values(&mut self, what: &str) -> Result<(usize, Vec<f64>)> {
        loop {
            let Some((idx, raw)) = self.inner.next() else {
                return Err(RepairError::NnetParse {
                    line: 0,
                    message: format!("unexpected end of file: missing {what}"),
                });
            };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let values = line
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>().map_err(|_| RepairError::NnetParse {
                        line: idx + 1,
                        message: format!("invalid number `{s}` in {what}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok((idx + 1, values));
        }
    }

    fn expect_len(&mut self, what: &str, len: usize) -> Result<Vec<f64>> {
        let (line, values) = self.next_values(what)?;
        if values.len() != len {
            return Err(RepairError::NnetParse {
                line,
                message: format!("{what}: expected {len} values, found {}", values.len()),
            });
        }
        Ok(values)
    }
}

fn as_count(v: f64, line: usize, what: &str) -> Result<usize> {
    if v.fract() != 0.0 || v < 1.0 {
        return Err(RepairError::NnetParse {
            line,
            message: format!("{what} must be a positive integer, found {v}"),
        });
    }
    Ok(v as usize)
}

pub fn parse_nnet(text: &str) -> Result<Network> {
    let mut activation = Activation::Relu;
    let mut body_start = 0;
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(comment) = t.strip_prefix("//") {
            if let Some(name) = comment.trim().strip_prefix("activation:") {
                activation = name.trim().parse().map_err(|e: RepairError| {
                    RepairError::NnetParse {
                        line: idx + 1,
                        message: e.to_string(),
                    }
                })?;
            }
            body_start = idx + 1;
        } else if t.is_empty() {
            body_start = idx + 1;
        } else {
            break;
        }
    }
    let body: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i < body_start { "" } else { l })
        .collect::<Vec<_>>()
        .join("\n");
    let mut lines = Lines {
        inner: body.lines().enumerate().peekable(),
    };

    let (hline, header) = lines.next_values("header")?;
    if header.len() < 3 {
        return Err(RepairError::NnetParse {
            line: hline,
            message: "header needs numLayers, inputSize, outputSize".into(),
        });
    }
    let num_layers = as_count(header[0], hline, "numLayers")?;
    let input_size = as_count(header[1], hline, "inputSize")?;
    let output_size = as_count(header[2], hline, "outputSize")?;

    let (sline, sizes) = lines.next_values("layer sizes")?;
    if sizes.len() != num_layers + 1 {
        return Err(RepairError::NnetParse {
            line: sline,
            message: format!(
                "layer sizes: expected {} values, found {}",
                num_layers + 1,
                sizes.len()
            ),
        });
    }
    let sizes = sizes
        .iter()
        .map(|&v| as_count(v, sline, "layer size"))
        .collect::<Result<Vec<_>>>()?;
    if sizes[0] != input_size || sizes[num_layers] != output_size {
        return Err(RepairError::NnetParse {
            line: sline,
            message: "layer sizes disagree with the header input/output sizes".into(),
        });
    }

    lines.next_values("symmetric flag")?;
    let normalization = Normalization {
        input_mins: lines.expect_len("input minimums", input_size)?,
        input_maxes: lines.expect_len("input maximums", input_size)?,
        means: lines.expect_len("means", input_size + 1)?,
        ranges: lines.expect_len("ranges", input_size + 1)?,
    };

    let mut layers = Vec::with_capacity(num_layers);
    for l in 0..num_layers {
        let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
        let mut weights = Array2::zeros((fan_out, fan_in));
        for r in 0..fan_out {
            let what = format!("weights of layer {} (row {})", l + 1, r + 1);
            let row = lines.expect_len(&what, fan_in)?;
            for (c, v) in row.into_iter().enumerate() {
                weights[[r, c]] = v;
            }
        }
        let mut biases = Array1::zeros(fan_out);
        for r in 0..fan_out {
            let what = format!("biases of layer {} (entry {})", l + 1, r + 1);
            biases[r] = lines.expect_len(&what, 1)?[0];
        }
        layers.push(Layer::new(weights, biases));
    }
    if let Some((line, vals)) = lines.next_values("trailing data").ok() {
        return Err(RepairError::NnetParse {
            line,
            message: format!("{} unexpected values after the last layer", vals.len()),
        });
    }
    Network::new(layers, activation)?.with_normalization(normalization)
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        let _ = write!(out, "{v},");
    }
    out.push('\n');
}

pub fn serialize_nnet(net: &Network) -> String {
    let sizes = net.layer_sizes();
    let m = net.input_dim();
    let mut out = String::new();
    out.push_str("// Dense feedforward network in NNet format\n");
    let _ = writeln!(out, "// activation: {}", net.activation());
    let max_size = sizes.iter().copied().max().unwrap_or(0);
    let _ = writeln!(
        out,
        "{},{},{},{},",
        net.layers().len(),
        m,
        net.output_dim(),
        max_size
    );
    let _ = writeln!(
        out,
        "{}",
        sizes.iter().map(|s| format!("{s},")).collect::<String>()
    );
    out.push_str("0,\n");
    let default_norm = Normalization {
        input_mins: vec![f64::MIN; m],
        input_maxes: vec![f64::MAX; m],
        means: vec![0.0; m + 1],
        ranges: vec![1.0; m + 1],
    };
    let norm = net.normalization().unwrap_or(&default_norm);
    push_row(&mut out, norm.input_mins.iter().copied());
    push_row(&mut out, norm.input_maxes.iter().copied());
    push_row(&mut out, norm.means.iter().copied());
    push_row(&mut out, norm.ranges.iter().copied());
    for layer in net.layers() {
        for row in layer.weights.rows() {
            push_row(&mut out, row.iter().copied());
        }
        for &b in layer.biases.iter() {
            push_row(&mut out, [b]);
        }
    }
    out
}

pub fn read_nnet(path: impl AsRef<Path>) -> Result<Network> {
    parse_nnet(&std::fs::read_to_string(path)?)
}

pub fn write_nnet(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serialize_nnet(net))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> Network {
        Network::new(
            vec![
                Layer::new(array![[0.1, -2.5], [1e-7, 3.25], [7.5188840201005975, 0.0]], array![0.5, -0.125, 1.0 / 3.0]),
                Layer::new(array![[1.0, 2.0, -3.0]], array![-0.0625]),
            ],
            Activation::Elu { alpha: 0.5 },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let net = sample();
        let text = serialize_nnet(&net);
        let back = parse_nnet(&text).unwrap();
        assert_eq!(back.activation(), net.activation());
        assert_eq!(back.layers(), net.layers());
        assert_eq!(back.params_flat(), net.params_flat());
    }

    #[test]
    fn header_lines() {
        let text = serialize_nnet(&sample());
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with("//")).collect();
        assert_eq!(data[0], "2,2,1,3,");
        assert_eq!(data[1], "2,3,1,");
        assert_eq!(data[2], "0,");
    }

    #[test]
    fn parses_reluplex_style_text() {
        let text = "// Neural Network File Format by Kyle Julian\n\
                    // second comment\n\
                    1,2,1,2,\n\
                    2,1,\n\
                    0,\n\
                    0.0,-1.0,\n\
                    1.0,1.0,\n\
                    0.5,0.0,0.0,\n\
                    1.0,2.0,1.0,\n\
                    3.0,-4.0,\n\
                    0.25,\n";
        let net = parse_nnet(text).unwrap();
        assert_eq!(net.activation(), Activation::Relu);
        assert_eq!(net.layer_sizes(), vec![2, 1]);
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap(), vec![-0.75]);
        let norm = net.normalization().unwrap();
        assert_eq!(norm.means, vec![0.5, 0.0, 0.0]);
    }

    #[test]
    fn truncated_file_names_missing_block() {
        let text = serialize_nnet(&sample());
        let cut: Vec<&str> = text.lines().collect();
        let truncated = cut[..cut.len() - 2].join("\n");
        let err = parse_nnet(&truncated).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("biases of layer 2") || msg.contains("weights of layer 2"), "{msg}");

        // two comments, header, sizes, flag, mins
        let header_only = cut[..6].join("\n");
        let msg = parse_nnet(&header_only).unwrap_err().to_string();
        assert!(msg.contains("input maximums"), "{msg}");
    }

    #[test]
    fn row_width_mismatch() {
        let text = serialize_nnet(&sample()).replacen("0.1,-2.5,", "0.1,", 1);
        let msg = parse_nnet(&text).unwrap_err().to_string();
        assert!(msg.contains("weights of layer 1 (row 1)"), "{msg}");
    }

    #[test]
    fn malformed_header() {
        assert!(parse_nnet("// c\nx,2,1,\n").is_err());
        assert!(parse_nnet("// c\n2,2,\n").is_err());
        assert!(parse_nnet("// c\n1,2,1,2,\n3,1,\n0,\n").is_err());
    }
}
