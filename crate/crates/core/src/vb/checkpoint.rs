//! Checkpoint serialization of a variational state.
//!
//! Layout: a single JSON header line (dimensions, iteration count, bound
//! trace) followed by one labeled CSV block per parameter array. Floats are
//! written in Rust's shortest round-trip form, so write → read → write is
//! byte-identical. The derived caches are rebuilt on load from the
//! accompanying measurement set rather than stored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthesis::MeasurementSet;
use crate::vb::state::VariationalState;

#[derive(Serialize, Deserialize)]
struct Header {
    n_sites: usize,
    n_classes: usize,
    iterations: usize,
    elbo_trace: Vec<f64>,
}

fn write_row<W: Write>(out: &mut W, row: &[f64]) -> Result<()> {
    let mut first = true;
    for v in row {
        if !first {
            write!(out, ",")?;
        }
        write!(out, "{v}")?;
        first = false;
    }
    writeln!(out)?;
    Ok(())
}

/// Writes a checkpoint to any writer.
pub fn write_checkpoint<W: Write>(
    out: &mut W,
    state: &VariationalState,
    elbo_trace: &[f64],
) -> Result<()> {
    let header = Header {
        n_sites: state.n_sites,
        n_classes: state.n_classes,
        iterations: elbo_trace.len().saturating_sub(1),
        elbo_trace: elbo_trace.to_vec(),
    };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    let k = state.n_classes;
    for (name, array) in [
        ("field_mean", &state.field_mean),
        ("field_var", &state.field_var),
        ("label_prob", &state.label_prob),
    ] {
        writeln!(out, "# {name}")?;
        for i in 0..state.n_sites {
            write_row(out, &array[i * k..(i + 1) * k])?;
        }
    }
    writeln!(out, "# noise")?;
    write_row(out, &[state.noise_shape, state.noise_scale])?;
    for (name, array) in [
        ("mean_mean", &state.mean_mean),
        ("mean_var", &state.mean_var),
        ("prec_shape", &state.prec_shape),
        ("prec_scale", &state.prec_scale),
    ] {
        writeln!(out, "# {name}")?;
        write_row(out, array)?;
    }
    Ok(())
}

struct LineReader<R: BufRead> {
    inner: R,
    line_no: usize,
}

impl<R: BufRead> LineReader<R> {
    fn next_line(&mut self) -> Result<String> {
        let mut buf = String::new();
        let n = self.inner.read_line(&mut buf)?;
        self.line_no += 1;
        if n == 0 {
            return Err(Error::Parse {
                line: self.line_no,
                message: "unexpected end of checkpoint".into(),
            });
        }
        Ok(buf.trim_end_matches(['\n', '\r']).to_string())
    }

    fn expect_marker(&mut self, name: &str) -> Result<()> {
        let line = self.next_line()?;
        if line != format!("# {name}") {
            return Err(Error::Parse {
                line: self.line_no,
                message: format!("expected block '# {name}', found '{line}'"),
            });
        }
        Ok(())
    }

    fn parse_row(&mut self, expect: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let values: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let values = values.map_err(|e| Error::Parse {
            line: self.line_no,
            message: format!("bad float: {e}"),
        })?;
        if values.len() != expect {
            return Err(Error::Parse {
                line: self.line_no,
                message: format!("expected {expect} values, found {}", values.len()),
            });
        }
        Ok(values)
    }
}

/// Reads a checkpoint, rebuilding the caches from the measurement set the
/// state was trained on.
pub fn read_checkpoint<R: BufRead>(
    reader: R,
    data: &MeasurementSet,
) -> Result<(VariationalState, Vec<f64>)> {
    let mut lines = LineReader {
        inner: reader,
        line_no: 0,
    };
    let header_line = lines.next_line()?;
    let header: Header = serde_json::from_str(&header_line).map_err(|e| Error::Parse {
        line: 1,
        message: format!("bad header: {e}"),
    })?;
    if header.n_sites != data.n_points() {
        return Err(Error::dims(
            data.n_points(),
            header.n_sites,
            "checkpoint grid size",
        ));
    }
    if header.elbo_trace.len() != header.iterations + 1 {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "trace length {} inconsistent with {} iterations",
                header.elbo_trace.len(),
                header.iterations
            ),
        });
    }
    let (n, k) = (header.n_sites, header.n_classes);
    let mut site_arrays = Vec::with_capacity(3);
    for name in ["field_mean", "field_var", "label_prob"] {
        lines.expect_marker(name)?;
        let mut array = Vec::with_capacity(n * k);
        for _ in 0..n {
            array.extend(lines.parse_row(k)?);
        }
        site_arrays.push(array);
    }
    let label_prob = site_arrays.pop().unwrap();
    let field_var = site_arrays.pop().unwrap();
    let field_mean = site_arrays.pop().unwrap();
    lines.expect_marker("noise")?;
    let noise = lines.parse_row(2)?;
    let mut class_arrays = Vec::with_capacity(4);
    for name in ["mean_mean", "mean_var", "prec_shape", "prec_scale"] {
        lines.expect_marker(name)?;
        class_arrays.push(lines.parse_row(k)?);
    }
    let prec_scale = class_arrays.pop().unwrap();
    let prec_shape = class_arrays.pop().unwrap();
    let mean_var = class_arrays.pop().unwrap();
    let mean_mean = class_arrays.pop().unwrap();

    let mut state = VariationalState {
        n_sites: n,
        n_classes: k,
        field_mean,
        field_var,
        label_prob,
        noise_shape: noise[0],
        noise_scale: noise[1],
        mean_mean,
        mean_var,
        prec_shape,
        prec_scale,
        site_mean: vec![0.0; n],
        predicted: Vec::new(),
    };
    state.refresh_site_means();
    state.refresh_predicted(data);
    state.validate(data, 1e-6)?;
    Ok((state, header.elbo_trace))
}

/// Writes a checkpoint file.
pub fn save_checkpoint(path: &Path, state: &VariationalState, elbo_trace: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut out, state, elbo_trace)?;
    out.flush()?;
    Ok(())
}

/// Reads a checkpoint file.
pub fn load_checkpoint(path: &Path, data: &MeasurementSet) -> Result<(VariationalState, Vec<f64>)> {
    read_checkpoint(BufReader::new(File::open(path)?), data)
}
