//! Parameter files: a plain-text manifest terminated by `end`, followed by the
//! parameters as little-endian `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Architecture, PolicyParams};

const MAGIC: &str = "spde-rl-policy v1";

pub fn write_checkpoint<W: Write>(mut w: W, params: &PolicyParams) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    for line in params.manifest() {
        writeln!(w, "{line}")?;
    }
    writeln!(w, "end")?;
    for v in params.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn field<'a>(lines: &'a [String], key: &str) -> Result<&'a str> {
    lines
        .iter()
        .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix(' ').or((rest.is_empty()).then_some(""))))
        .ok_or_else(|| bad(format!("manifest is missing `{key}`")))
}

fn number(s: &str, key: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| bad(format!("`{key}` is not a count: {s:?}")))
}

fn architecture_from_manifest(lines: &[String]) -> Result<Architecture> {
    match field(lines, "arch")? {
        "mlp" => {
            let hidden = field(lines, "hidden")?
                .split_whitespace()
                .map(|h| number(h, "hidden"))
                .collect::<Result<Vec<_>>>()?;
            Ok(Architecture::Mlp {
                inputs: number(field(lines, "inputs")?, "inputs")?,
                hidden,
                outputs: number(field(lines, "outputs")?, "outputs")?,
            })
        }
        "cnn" => Ok(Architecture::Cnn {
            side: number(field(lines, "side")?, "side")?,
            outputs: number(field(lines, "outputs")?, "outputs")?,
        }),
        other => Err(bad(format!("unknown architecture {other:?}"))),
    }
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<PolicyParams> {
    let mut reader = BufReader::new(r);
    let mut lines = Vec::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(bad("manifest is not terminated by `end`"));
        }
        let line = line.trim_end_matches('\n').to_string();
        if line == "end" {
            break;
        }
        lines.push(line);
        if lines.len() > 256 {
            return Err(bad("manifest is too long"));
        }
    }
    if lines.first().map(String::as_str) != Some(MAGIC) {
        return Err(bad(format!("not a policy checkpoint (expected header {MAGIC:?})")));
    }
    let body = &lines[1..];
    let arch = architecture_from_manifest(body)?;
    let expected = PolicyParams::zeros(&arch).map_err(|e| bad(format!("manifest describes an invalid network: {e}")))?;
    if expected.manifest() != body {
        return Err(bad("layer shapes in the manifest do not match the architecture"));
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * expected.len() {
        return Err(bad(format!(
            "expected {} parameters ({} bytes), found {} bytes",
            expected.len(),
            8 * expected.len(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    PolicyParams::from_values(&arch, values).map_err(|e| bad(e.to_string()))
}

pub fn save_checkpoint(path: &Path, params: &PolicyParams) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), params)
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyParams> {
    read_checkpoint(File::open(path)?)
}
