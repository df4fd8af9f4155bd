//! Text model format.
//!
//! ```text
//! dmtl-model 1
//! input_dim 16
//! trunk_layers 32
//! ordinal_as_nominal 0
//! seed 7
//! task age:ordinal:8
//! task gender:nominal:4
//! tensor trunk.0.weight 16 32
//! <row-major values, space separated>
//! tensor trunk.0.bias 32
//! ...
//! tensor log_var 2
//! ...
//! end
//! ```
//!
//! Tensors appear in a fixed order (trunk layers, heads, log-variances) and
//! values are written in the shortest form that parses back bit-exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::net::{init_params, ModelParams, NetConfig};
use crate::task::TaskSpec;
use crate::trainer::Model;

pub const MAGIC: &str = "dmtl-model";
pub const VERSION: u32 = 1;

pub fn to_string(model: &Model) -> String {
    let cfg = &model.config;
    let mut out = String::new();
    out.push_str(&format!("{MAGIC} {VERSION}\n"));
    out.push_str(&format!("input_dim {}\n", cfg.input_dim));
    let widths: Vec<String> = cfg.trunk_layers.iter().map(usize::to_string).collect();
    out.push_str(&format!("trunk_layers {}\n", widths.join(",")));
    out.push_str(&format!(
        "ordinal_as_nominal {}\n",
        u8::from(cfg.ordinal_as_nominal)
    ));
    out.push_str(&format!("seed {}\n", cfg.seed));
    for t in &cfg.tasks {
        out.push_str(&format!("task {t}\n"));
    }
    let mut params = model.params.clone();
    let shapes = tensor_shapes(&params);
    for (slot, shape) in params.slots_mut().into_iter().zip(shapes) {
        let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
        out.push_str(&format!("tensor {} {}\n", slot.name, dims.join(" ")));
        let vals: Vec<String> = slot.values.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&vals.join(" "));
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

fn tensor_shapes(p: &ModelParams) -> Vec<Vec<usize>> {
    let mut shapes = Vec::new();
    for l in p.trunk.iter().chain(&p.heads) {
        shapes.push(vec![l.fan_in(), l.fan_out()]);
        shapes.push(vec![l.fan_out()]);
    }
    shapes.push(vec![p.log_var.len()]);
    shapes
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(format!("model file: {}", msg.into()))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| format_err("unexpected end of file"))
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        let (n, line) = self.next_line()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| format_err(format!("line {n}: expected {key:?}")))
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| format_err(format!("bad {what} {s:?}")))
}

pub fn from_str(text: &str) -> Result<Model> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let header = lines.inner.next().map(|(_, l)| l).unwrap_or("");
    if header != format!("{MAGIC} {VERSION}") {
        return Err(Error::Format(format!(
            "model file: missing or unsupported version header (expected \"{MAGIC} {VERSION}\")"
        )));
    }
    let input_dim = parse_num(lines.field("input_dim")?, "input_dim")?;
    let trunk_layers = lines
        .field("trunk_layers")?
        .split(',')
        .map(|w| parse_num(w, "trunk width"))
        .collect::<Result<Vec<usize>>>()?;
    let ordinal_as_nominal = match lines.field("ordinal_as_nominal")? {
        "0" => false,
        "1" => true,
        other => return Err(format_err(format!("bad ordinal_as_nominal {other:?}"))),
    };
    let seed = parse_num(lines.field("seed")?, "seed")?;

    let mut tasks = Vec::new();
    let (mut n, mut line) = lines.next_line()?;
    while let Some(spec) = line.strip_prefix("task ") {
        tasks.push(
            spec.parse::<TaskSpec>()
                .map_err(|e| format_err(format!("line {n}: {e}")))?,
        );
        (n, line) = lines.next_line()?;
    }
    let config = NetConfig {
        input_dim,
        trunk_layers,
        tasks,
        seed,
        ordinal_as_nominal,
    };
    config.validate().map_err(|e| format_err(e.to_string()))?;

    let mut params = init_params(&config);
    let shapes = tensor_shapes(&params);
    for (slot, shape) in params.slots_mut().into_iter().zip(shapes) {
        let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
        let expected = format!("tensor {} {}", slot.name, dims.join(" "));
        if line != expected {
            return Err(format_err(format!(
                "line {n}: expected {expected:?}, found {line:?}"
            )));
        }
        let (vn, values) = lines.next_line()?;
        let parsed: Vec<f64> = values
            .split_ascii_whitespace()
            .map(|v| parse_num(v, "value"))
            .collect::<Result<_>>()?;
        if parsed.len() != slot.values.len() {
            return Err(format_err(format!(
                "line {vn}: {} has {} values, expected {}",
                slot.name,
                parsed.len(),
                slot.values.len()
            )));
        }
        if parsed.iter().any(|v| !v.is_finite()) {
            return Err(format_err(format!(
                "line {vn}: non-finite value in {}",
                slot.name
            )));
        }
        slot.values.copy_from_slice(&parsed);
        (n, line) = lines.next_line()?;
    }
    if line != "end" {
        return Err(format_err(format!("line {n}: expected \"end\"")));
    }
    Ok(Model { config, params })
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}
