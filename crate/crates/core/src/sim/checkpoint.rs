//! Binary checkpoints: little-endian, `QCH1` magic.
//!
//! Version 1 holds the header and field. Version 2 appends the step count
//! and the Adams–Bashforth history so a resumed run continues the same
//! trajectory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::SimState;
use crate::error::{QuenchError, Result};
use crate::spectral::{ChannelGrid, Field};

const MAGIC: &[u8; 4] = b"QCH1";
pub const CHECKPOINT_VERSION: u32 = 2;

pub fn write_checkpoint<W: Write>(state: &SimState, c: f64, mut w: W) -> Result<()> {
    let grid = state.grid();
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(grid.nx() as u32).to_le_bytes())?;
    w.write_all(&(grid.ny() as u32).to_le_bytes())?;
    for v in [grid.half_width(), grid.k(), c, state.t] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in &state.field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&state.step_count.to_le_bytes())?;
    match &state.prev_nonlinear {
        None => w.write_all(&[0u8])?,
        Some(prev) => {
            w.write_all(&[1u8])?;
            for z in prev {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| QuenchError::Checkpoint(format!("truncated {what}: {e}")))?;
    Ok(b)
}

fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array::<8, _>(r, what)?))
}

/// Reads a checkpoint for `grid`; returns the state and the stored speed.
pub fn read_checkpoint<R: Read>(mut r: R, grid: &Arc<ChannelGrid>) -> Result<(SimState, f64)> {
    let magic = read_array::<4, _>(&mut r, "magic")?;
    if &magic != MAGIC {
        return Err(QuenchError::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = u32::from_le_bytes(read_array::<4, _>(&mut r, "version")?);
    if version == 0 || version > CHECKPOINT_VERSION {
        return Err(QuenchError::Checkpoint(format!("unsupported version {version}")));
    }
    let nx = u32::from_le_bytes(read_array::<4, _>(&mut r, "n_x")?) as usize;
    let ny = u32::from_le_bytes(read_array::<4, _>(&mut r, "n_y")?) as usize;
    let m = read_f64(&mut r, "M")?;
    let k = read_f64(&mut r, "k")?;
    let c = read_f64(&mut r, "c")?;
    let t = read_f64(&mut r, "t")?;
    if nx != grid.nx() || ny != grid.ny() || m != grid.half_width() || k != grid.k() {
        return Err(QuenchError::Checkpoint(format!(
            "checkpoint grid {nx}x{ny}, M={m}, k={k} does not match {}x{}, M={}, k={}",
            grid.nx(),
            grid.ny(),
            grid.half_width(),
            grid.k()
        )));
    }
    let mut values = Vec::with_capacity(nx * ny);
    for _ in 0..nx * ny {
        values.push(read_f64(&mut r, "field")?);
    }
    let field = Field::new(grid.clone(), values, t).map_err(|e| QuenchError::Checkpoint(e.to_string()))?;
    let mut state = SimState::from_field(field);
    if version >= 2 {
        state.step_count = u64::from_le_bytes(read_array::<8, _>(&mut r, "step count")?);
        let [flag] = read_array::<1, _>(&mut r, "history flag")?;
        match flag {
            0 => {}
            1 => {
                let mut prev = Vec::with_capacity(nx * ny);
                for _ in 0..nx * ny {
                    let re = read_f64(&mut r, "history")?;
                    let im = read_f64(&mut r, "history")?;
                    prev.push(C64::new(re, im));
                }
                state.prev_nonlinear = Some(prev);
            }
            _ => return Err(QuenchError::Checkpoint(format!("bad history flag {flag}"))),
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(QuenchError::Checkpoint("trailing bytes".into()));
    }
    Ok((state, c))
}

pub fn checkpoint_save(state: &SimState, c: f64, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(state, c, BufWriter::new(File::create(path)?))
}

pub fn checkpoint_load(path: impl AsRef<Path>, grid: &Arc<ChannelGrid>) -> Result<(SimState, f64)> {
    read_checkpoint(BufReader::new(File::open(path)?), grid)
}
