//! Binary checkpoint format for value networks.
//!
//! Layout (all integers little-endian):
//!   magic   4 bytes  "CMQN"
//!   version u32      currently 1
//!   layers  u32      layer count L
//!   dims    L x (u32 in, u32 out)
//!   data    per layer: out*in f64 weights (row-major), then out f64 biases
//!
//! Writes go through a temp file in the target directory followed by a rename,
//! so a crash mid-save never leaves a truncated checkpoint behind.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::agent::{Layer, ValueNet};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CMQN";
pub const VERSION: u32 = 1;

pub fn save_net<W: Write>(net: &ValueNet, mut w: W) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let layers = net.layers();
    w.write_all(&u32::try_from(layers.len()).map_err(|_| Error::Checkpoint("too many layers".into()))?.to_le_bytes())?;
    for l in layers {
        let in_dim = u32::try_from(l.in_dim).map_err(|_| Error::Checkpoint("layer too wide".into()))?;
        let out_dim = u32::try_from(l.out_dim).map_err(|_| Error::Checkpoint("layer too wide".into()))?;
        w.write_all(&in_dim.to_le_bytes())?;
        w.write_all(&out_dim.to_le_bytes())?;
    }
    for l in layers {
        for v in l.w.iter().chain(&l.b) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_net<R: Read>(mut r: R) -> Result<ValueNet> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}, expected {VERSION}")));
    }
    let layer_count = read_u32(&mut r)? as usize;
    if layer_count == 0 {
        return Err(Error::Checkpoint("checkpoint has no layers".into()));
    }
    let mut dims = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let in_dim = read_u32(&mut r)? as usize;
        let out_dim = read_u32(&mut r)? as usize;
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Checkpoint("zero layer dimension".into()));
        }
        dims.push((in_dim, out_dim));
    }
    let mut layers = Vec::with_capacity(layer_count);
    for (in_dim, out_dim) in dims {
        let mut w = vec![0.0; in_dim * out_dim];
        let mut b = vec![0.0; out_dim];
        for v in w.iter_mut().chain(b.iter_mut()) {
            *v = read_f64(&mut r)?;
        }
        layers.push(
            Layer::new(in_dim, out_dim, w, b)
                .map_err(|e| Error::Checkpoint(format!("invalid layer: {e}")))?,
        );
    }
    // a well-formed file ends exactly here
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(Error::Checkpoint("trailing bytes after network data".into())),
        Err(e) => return Err(e.into()),
    }
    ValueNet::from_layers(layers).map_err(|e| Error::Checkpoint(format!("inconsistent layer chain: {e}")))
}

pub fn save_net_to_path<P: AsRef<Path>>(net: &ValueNet, path: P) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        save_net(net, &mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_net_from_path<P: AsRef<Path>>(path: P) -> Result<ValueNet> {
    load_net(BufReader::new(File::open(path.as_ref())?))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn sample_net() -> ValueNet {
        let mut rng = rng_from(0xC4E5, 9);
        ValueNet::new(&[13, 64, 64, 9], &mut rng).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = sample_net();
        let mut buf = Vec::new();
        save_net(&net, &mut buf).unwrap();
        let loaded = load_net(buf.as_slice()).unwrap();
        assert_eq!(net.dims(), loaded.dims());
        let a = net.get_params();
        let b = loaded.get_params();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("agent_00.ckpt");
        let net = sample_net();
        save_net_to_path(&net, &path).unwrap();
        let loaded = load_net_from_path(&path).unwrap();
        assert_eq!(net.get_params(), loaded.get_params());
        // temp file was renamed away
        assert!(!path.with_extension("ckpt.tmp").exists());
    }

    #[test]
    fn header_layout_is_stable() {
        let mut rng = rng_from(1, 1);
        let net = ValueNet::new(&[2, 3, 9], &mut rng).unwrap();
        let mut buf = Vec::new();
        save_net(&net, &mut buf).unwrap();
        assert_eq!(&buf[0..4], b"CMQN");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1); // version
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2); // layers
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2); // l0 in
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 3); // l0 out
        assert_eq!(u32::from_le_bytes(buf[20..24].try_into().unwrap()), 3); // l1 in
        assert_eq!(u32::from_le_bytes(buf[24..28].try_into().unwrap()), 9); // l1 out
        // header 28 bytes + (2*3 + 3 + 3*9 + 9) doubles
        assert_eq!(buf.len(), 28 + 8 * (6 + 3 + 27 + 9));
        // first weight is layer 0 row 0 col 0
        let w0 = f64::from_le_bytes(buf[28..36].try_into().unwrap());
        assert_eq!(w0.to_bits(), net.layers()[0].w[0].to_bits());
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let net = sample_net();
        let mut buf = Vec::new();
        save_net(&net, &mut buf).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(load_net(bad_magic.as_slice()), Err(Error::Checkpoint(_))));

        let mut bad_version = buf.clone();
        bad_version[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(load_net(bad_version.as_slice()), Err(Error::Checkpoint(_))));

        let truncated = &buf[..buf.len() - 5];
        assert!(load_net(truncated).is_err());

        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(matches!(load_net(trailing.as_slice()), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn rejects_inconsistent_layer_chain() {
        // hand-build a header whose second layer input does not match the first output
        let mut buf = Vec::new();
        buf.extend_from_slice(b"CMQN");
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&2u32.to_le_bytes());
        for d in [2u32, 3, 4, 9] {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        for _ in 0..(2 * 3 + 3 + 4 * 9 + 9) {
            buf.extend_from_slice(&0.0f64.to_le_bytes());
        }
        let err = load_net(buf.as_slice()).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "got {err:?}");
    }
}
