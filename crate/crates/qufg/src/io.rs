//! Binary file formats: coefficient dumps (`QFC1`) and model checkpoints
//! (`QFM1` homogeneous, `QFH1` heterogeneous).
//!
//! All files are little-endian. A coefficient dump is the magic, then
//! `N, d, K, L` as 32-bit integers, then the blocks in canonical order as
//! row-major 64-bit floats. Checkpoints store dimension metadata followed
//! by each parameter tensor in declaration order.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::neural::{ConvLayerParams, HeteroModelParams, MergeMode, NetworkParams, Variant};
use crate::spectral::FrameletCoefficients;

const COEFF_MAGIC: &[u8; 4] = b"QFC1";
const MODEL_MAGIC: &[u8; 4] = b"QFM1";
const HETERO_MAGIC: &[u8; 4] = b"QFH1";

fn write_matrix<W: Write>(w: &mut W, m: &Array2<f64>) -> Result<()> {
    for v in m.iter() {
        w.write_f64::<LittleEndian>(*v)?;
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let mut data = vec![0.0; rows * cols];
    for v in data.iter_mut() {
        *v = r.read_f64::<LittleEndian>()?;
    }
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::input(format!("matrix shape: {e}")))
}

fn check_magic<R: Read>(r: &mut R, expected: &[u8; 4], what: &str) -> Result<()> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != expected {
        return Err(Error::input(format!(
            "not a {what} file (magic {:?})",
            String::from_utf8_lossy(&magic)
        )));
    }
    Ok(())
}

pub fn write_coefficients(path: &Path, coeffs: &FrameletCoefficients) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(COEFF_MAGIC)?;
    file.write_u32::<LittleEndian>(coeffs.num_nodes() as u32)?;
    file.write_u32::<LittleEndian>(coeffs.num_channels() as u32)?;
    file.write_u32::<LittleEndian>(coeffs.num_highpass as u32)?;
    file.write_u32::<LittleEndian>(coeffs.levels as u32)?;
    for block in &coeffs.blocks {
        write_matrix(&mut file, block)?;
    }
    Ok(())
}

pub fn read_coefficients(path: &Path) -> Result<FrameletCoefficients> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    check_magic(&mut file, COEFF_MAGIC, "coefficient")?;
    let n = file.read_u32::<LittleEndian>()? as usize;
    let d = file.read_u32::<LittleEndian>()? as usize;
    let num_highpass = file.read_u32::<LittleEndian>()? as usize;
    let levels = file.read_u32::<LittleEndian>()? as usize;
    let block_count = 1 + num_highpass * (levels + 1);
    let mut blocks = Vec::with_capacity(block_count);
    for _ in 0..block_count {
        blocks.push(read_matrix(&mut file, n, d)?);
    }
    Ok(FrameletCoefficients {
        blocks,
        num_highpass,
        levels,
    })
}

fn write_layer<W: Write>(w: &mut W, layer: &ConvLayerParams) -> Result<()> {
    write_matrix(w, &layer.feature_weights)?;
    write_matrix(w, &layer.spectral_filter)?;
    for v in layer.shrink_raw.iter() {
        w.write_f64::<LittleEndian>(*v)?;
    }
    Ok(())
}

fn read_layer<R: Read>(
    r: &mut R,
    d_in: usize,
    d_out: usize,
    blocks: usize,
    n: usize,
) -> Result<ConvLayerParams> {
    let feature_weights = read_matrix(r, d_in, d_out)?;
    let spectral_filter = read_matrix(r, blocks, n)?;
    let mut shrink_raw = Array1::zeros(blocks);
    for v in shrink_raw.iter_mut() {
        *v = r.read_f64::<LittleEndian>()?;
    }
    Ok(ConvLayerParams {
        feature_weights,
        spectral_filter,
        shrink_raw,
    })
}

fn variant_code(v: Variant) -> u32 {
    match v {
        Variant::ReluFilter => 0,
        Variant::Shrinkage => 1,
    }
}

fn variant_from(code: u32) -> Result<Variant> {
    match code {
        0 => Ok(Variant::ReluFilter),
        1 => Ok(Variant::Shrinkage),
        other => Err(Error::input(format!("unknown variant code {other}"))),
    }
}

pub fn write_checkpoint(path: &Path, net: &NetworkParams) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(MODEL_MAGIC)?;
    file.write_u32::<LittleEndian>(variant_code(net.variant))?;
    let (d_in, hidden) = net.layer1.feature_weights.dim();
    let (_, classes) = net.layer2.feature_weights.dim();
    let (blocks, n) = net.layer1.spectral_filter.dim();
    for dim in [d_in, hidden, classes, blocks, n] {
        file.write_u32::<LittleEndian>(dim as u32)?;
    }
    file.write_f64::<LittleEndian>(net.dropout_rate)?;
    write_layer(&mut file, &net.layer1)?;
    write_layer(&mut file, &net.layer2)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<NetworkParams> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    check_magic(&mut file, MODEL_MAGIC, "model checkpoint")?;
    let variant = variant_from(file.read_u32::<LittleEndian>()?)?;
    let d_in = file.read_u32::<LittleEndian>()? as usize;
    let hidden = file.read_u32::<LittleEndian>()? as usize;
    let classes = file.read_u32::<LittleEndian>()? as usize;
    let blocks = file.read_u32::<LittleEndian>()? as usize;
    let n = file.read_u32::<LittleEndian>()? as usize;
    let dropout_rate = file.read_f64::<LittleEndian>()?;
    let layer1 = read_layer(&mut file, d_in, hidden, blocks, n)?;
    let layer2 = read_layer(&mut file, hidden, classes, blocks, n)?;
    Ok(NetworkParams {
        layer1,
        layer2,
        dropout_rate,
        variant,
    })
}

pub fn write_hetero_checkpoint(path: &Path, hm: &HeteroModelParams) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(HETERO_MAGIC)?;
    file.write_u32::<LittleEndian>(variant_code(hm.variant))?;
    file.write_u32::<LittleEndian>(match hm.merge {
        MergeMode::Mean => 0,
        MergeMode::Weighted => 1,
    })?;
    let (d_in, hidden) = hm.branches[0].feature_weights.dim();
    let (_, classes) = hm.classifier.feature_weights.dim();
    let (blocks, n) = hm.classifier.spectral_filter.dim();
    for dim in [hm.branches.len(), d_in, hidden, classes, blocks, n] {
        file.write_u32::<LittleEndian>(dim as u32)?;
    }
    file.write_f64::<LittleEndian>(hm.dropout_rate)?;
    for branch in &hm.branches {
        write_layer(&mut file, branch)?;
    }
    write_layer(&mut file, &hm.classifier)?;
    for v in hm.merge_logits.iter() {
        file.write_f64::<LittleEndian>(*v)?;
    }
    Ok(())
}

pub fn read_hetero_checkpoint(path: &Path) -> Result<HeteroModelParams> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    check_magic(&mut file, HETERO_MAGIC, "hetero checkpoint")?;
    let variant = variant_from(file.read_u32::<LittleEndian>()?)?;
    let merge = match file.read_u32::<LittleEndian>()? {
        0 => MergeMode::Mean,
        1 => MergeMode::Weighted,
        other => return Err(Error::input(format!("unknown merge code {other}"))),
    };
    let num_branches = file.read_u32::<LittleEndian>()? as usize;
    let d_in = file.read_u32::<LittleEndian>()? as usize;
    let hidden = file.read_u32::<LittleEndian>()? as usize;
    let classes = file.read_u32::<LittleEndian>()? as usize;
    let blocks = file.read_u32::<LittleEndian>()? as usize;
    let n = file.read_u32::<LittleEndian>()? as usize;
    let dropout_rate = file.read_f64::<LittleEndian>()?;
    let mut branches = Vec::with_capacity(num_branches);
    for _ in 0..num_branches {
        branches.push(read_layer(&mut file, d_in, hidden, blocks, n)?);
    }
    let classifier = read_layer(&mut file, hidden, classes, blocks, n)?;
    let mut merge_logits = Array1::zeros(num_branches);
    for v in merge_logits.iter_mut() {
        *v = file.read_f64::<LittleEndian>()?;
    }
    Ok(HeteroModelParams {
        branches,
        classifier,
        merge,
        merge_logits,
        dropout_rate,
        variant,
    })
}
