//! The JSON run report every command writes next to its outputs.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::io::fmt_f64;

pub const TOOL: &str = "linmarg";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(role: &str, path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Inputs {
    pub files: Vec<FileDigest>,
    pub config: serde_json::Value,
}

/// Self-contained record of one run. No timestamps, so identical inputs give identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: Inputs,
    pub outputs: serde_json::Value,
}

impl RunReport {
    pub fn new(command: &str, seed: Option<u64>, files: Vec<FileDigest>, config: impl Serialize) -> CliResult<Self> {
        Ok(Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            seed,
            inputs: Inputs {
                files,
                config: to_value(config)?,
            },
            outputs: serde_json::Value::Null,
        })
    }

    pub fn with_outputs(mut self, outputs: impl Serialize) -> CliResult<Self> {
        self.outputs = to_value(outputs)?;
        Ok(self)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = to_json(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}

fn to_value(v: impl Serialize) -> CliResult<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| CliError::Numerical(format!("cannot serialize report: {e}")))
}

/// Pretty JSON whose floats carry 17 significant digits.
pub fn to_json(value: &impl Serialize) -> CliResult<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Numerical(format!("cannot serialize report: {e}")))?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}
