//! Versioned binary serialization for trained models.
//!
//! Layout, all little-endian:
//!
//! ```text
//! 8  bytes  magic "TSIMNN01"
//! u8        direction (0 = forward, 1 = inverse)
//! u8        activation (0 = tanh, 1 = sigmoid, 2 = relu, 3 = linear)
//! u8        sensor count, then per sensor: u8 length + UTF-8 bytes
//! u32 x3    n_in, n_hidden, n_out
//! u32       epochs run
//! f64       best validation MSE
//! f64 ...   input scaler (n_in scales, n_in offsets)
//! f64 ...   output scaler (n_out scales, n_out offsets)
//! f64 ...   w1 row-major (n_hidden x n_in), b1, w2 (n_out x n_hidden), b2
//! ```
//!
//! Loading verifies the magic, the enum codes, and that the file ends exactly
//! where the dimensions say it should.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::mat::Mat;
use super::mlp::{Activation, Mlp};
use super::scaler::AffineScaler;
use super::train::{Direction, TrainedModel};
use super::MappingError;

const MAGIC: &[u8; 8] = b"TSIMNN01";
const MAX_DIM: u32 = 1_000_000;

fn io_err(path: &Path, source: std::io::Error) -> MappingError {
    MappingError::ModelIo {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> MappingError {
    MappingError::ModelFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn direction_code(d: Direction) -> u8 {
    match d {
        Direction::Forward => 0,
        Direction::Inverse => 1,
    }
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Tanh => 0,
        Activation::Sigmoid => 1,
        Activation::Relu => 2,
        Activation::Linear => 3,
    }
}

/// Writes `model` to `path`, replacing any existing file.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), MappingError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| io_err(path, e));

    put(MAGIC)?;
    put(&[direction_code(model.direction)])?;
    put(&[activation_code(model.mlp.activation)])?;
    if model.sensors.len() > u8::MAX as usize {
        return Err(format_err(path, "too many sensor channels to encode"));
    }
    put(&[model.sensors.len() as u8])?;
    for name in &model.sensors {
        let bytes = name.as_bytes();
        if bytes.len() > u8::MAX as usize {
            return Err(format_err(path, format!("sensor name {name:?} too long")));
        }
        put(&[bytes.len() as u8])?;
        put(bytes)?;
    }
    for dim in [model.mlp.n_in(), model.mlp.n_hidden(), model.mlp.n_out()] {
        put(&(dim as u32).to_le_bytes())?;
    }
    put(&(model.epochs_run as u32).to_le_bytes())?;
    put(&model.best_val_mse.to_le_bytes())?;
    for block in [
        &model.input_scaler.scale,
        &model.input_scaler.offset,
        &model.output_scaler.scale,
        &model.output_scaler.offset,
        &model.mlp.w1.data,
        &model.mlp.b1,
        &model.mlp.w2.data,
        &model.mlp.b2,
    ] {
        for v in block {
            put(&v.to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

struct Cursor<'a> {
    r: BufReader<File>,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], MappingError> {
        let mut buf = [0u8; N];
        self.r
            .read_exact(&mut buf)
            .map_err(|_| format_err(self.path, "file truncated"))?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8, MappingError> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32, MappingError> {
        Ok(u32::from_le_bytes(self.bytes::<4>()?))
    }

    fn f64(&mut self) -> Result<f64, MappingError> {
        Ok(f64::from_le_bytes(self.bytes::<8>()?))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>, MappingError> {
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Reads a model previously written by [`save_model`].
pub fn load_model(path: &Path) -> Result<TrainedModel, MappingError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut c = Cursor {
        r: BufReader::new(file),
        path,
    };

    let magic: [u8; 8] = c.bytes()?;
    if &magic != MAGIC {
        return Err(format_err(path, "not a model file (bad magic)"));
    }
    let direction = match c.u8()? {
        0 => Direction::Forward,
        1 => Direction::Inverse,
        other => return Err(format_err(path, format!("unknown direction code {other}"))),
    };
    let activation = match c.u8()? {
        0 => Activation::Tanh,
        1 => Activation::Sigmoid,
        2 => Activation::Relu,
        3 => Activation::Linear,
        other => return Err(format_err(path, format!("unknown activation code {other}"))),
    };
    let n_sensors = c.u8()? as usize;
    let mut sensors = Vec::with_capacity(n_sensors);
    for _ in 0..n_sensors {
        let len = c.u8()? as usize;
        let mut buf = vec![0u8; len];
        c.r.read_exact(&mut buf)
            .map_err(|_| format_err(path, "file truncated"))?;
        let name =
            String::from_utf8(buf).map_err(|_| format_err(path, "sensor name is not UTF-8"))?;
        sensors.push(name);
    }
    let n_in = c.u32()?;
    let n_hidden = c.u32()?;
    let n_out = c.u32()?;
    for (label, dim) in [("n_in", n_in), ("n_hidden", n_hidden), ("n_out", n_out)] {
        if dim == 0 || dim > MAX_DIM {
            return Err(format_err(path, format!("implausible {label} = {dim}")));
        }
    }
    let (n_in, n_hidden, n_out) = (n_in as usize, n_hidden as usize, n_out as usize);
    let epochs_run = c.u32()? as usize;
    let best_val_mse = c.f64()?;

    let input_scaler = AffineScaler {
        scale: c.f64_vec(n_in)?,
        offset: c.f64_vec(n_in)?,
    };
    let output_scaler = AffineScaler {
        scale: c.f64_vec(n_out)?,
        offset: c.f64_vec(n_out)?,
    };
    let mlp = Mlp {
        activation,
        w1: Mat::from_vec(n_hidden, n_in, c.f64_vec(n_hidden * n_in)?),
        b1: c.f64_vec(n_hidden)?,
        w2: Mat::from_vec(n_out, n_hidden, c.f64_vec(n_out * n_hidden)?),
        b2: c.f64_vec(n_out)?,
    };

    let mut trailing = [0u8; 1];
    match c.r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(format_err(path, "trailing bytes after model payload")),
        Err(e) => return Err(io_err(path, e)),
    }

    Ok(TrainedModel {
        direction,
        sensors,
        mlp,
        input_scaler,
        output_scaler,
        epochs_run,
        best_val_mse,
    })
}
