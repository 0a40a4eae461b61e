//! Value-exact binary serialization for networks and optimizer state.
//!
//! All scalars are little-endian; floats round-trip bit-for-bit.

use super::{Activation, AdamState, Mlp};
use crate::error::{BresaError, Result};
use std::io::{Read, Write};

pub(crate) fn write_u8<W: Write>(w: &mut W, v: u8) -> Result<()> {
    w.write_all(&[v])?;
    Ok(())
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn write_vec<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    write_u64(w, v.len() as u64)?;
    for &x in v {
        write_f64(w, x)?;
    }
    Ok(())
}

fn read_vec<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = read_u64(r)? as usize;
    if n > 1 << 28 {
        return Err(BresaError::Checkpoint(format!("implausible vector length {n}")));
    }
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        v.push(read_f64(r)?);
    }
    Ok(v)
}

fn activation_tag(a: Activation) -> u8 {
    match a {
        Activation::Identity => 0,
        Activation::Tanh => 1,
        Activation::Sigmoid => 2,
    }
}

fn activation_from_tag(t: u8) -> Result<Activation> {
    match t {
        0 => Ok(Activation::Identity),
        1 => Ok(Activation::Tanh),
        2 => Ok(Activation::Sigmoid),
        _ => Err(BresaError::Checkpoint(format!("unknown activation tag {t}"))),
    }
}

pub fn write_mlp<W: Write>(w: &mut W, net: &Mlp) -> Result<()> {
    write_u32(w, net.layer_sizes().len() as u32)?;
    for &s in net.layer_sizes() {
        write_u64(w, s as u64)?;
    }
    write_u8(w, activation_tag(net.output_activation()))?;
    for layer in net.weights() {
        write_vec(w, layer)?;
    }
    for layer in net.biases() {
        write_vec(w, layer)?;
    }
    Ok(())
}

pub fn read_mlp<R: Read>(r: &mut R) -> Result<Mlp> {
    let n_layers = read_u32(r)? as usize;
    if !(2..=64).contains(&n_layers) {
        return Err(BresaError::Checkpoint(format!("implausible layer count {n_layers}")));
    }
    let mut sizes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        sizes.push(read_u64(r)? as usize);
    }
    let act = activation_from_tag(read_u8(r)?)?;
    let mut weights = Vec::with_capacity(n_layers - 1);
    for _ in 0..n_layers - 1 {
        weights.push(read_vec(r)?);
    }
    let mut biases = Vec::with_capacity(n_layers - 1);
    for _ in 0..n_layers - 1 {
        biases.push(read_vec(r)?);
    }
    Mlp::from_parts(sizes, weights, biases, act)
}

pub fn write_adam<W: Write>(w: &mut W, state: &AdamState) -> Result<()> {
    write_f64(w, state.learning_rate)?;
    write_f64(w, state.beta1)?;
    write_f64(w, state.beta2)?;
    write_f64(w, state.epsilon)?;
    write_u64(w, state.step)?;
    let (mw, vw, mb, vb) = state.parts();
    for group in [mw, vw, mb, vb] {
        write_u32(w, group.len() as u32)?;
        for v in group {
            write_vec(w, v)?;
        }
    }
    Ok(())
}

pub fn read_adam<R: Read>(r: &mut R) -> Result<AdamState> {
    let learning_rate = read_f64(r)?;
    let beta1 = read_f64(r)?;
    let beta2 = read_f64(r)?;
    let epsilon = read_f64(r)?;
    let step = read_u64(r)?;
    let mut groups = Vec::with_capacity(4);
    for _ in 0..4 {
        let n = read_u32(r)? as usize;
        let mut g = Vec::with_capacity(n);
        for _ in 0..n {
            g.push(read_vec(r)?);
        }
        groups.push(g);
    }
    let vb = groups.pop().unwrap();
    let mb = groups.pop().unwrap();
    let vw = groups.pop().unwrap();
    let mw = groups.pop().unwrap();
    Ok(AdamState::from_parts(
        learning_rate,
        beta1,
        beta2,
        epsilon,
        step,
        mw,
        vw,
        mb,
        vb,
    ))
}
