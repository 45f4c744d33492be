//! `M2FN` model files: magic, format version, input shape, layer table,
//! then every layer's weights followed by its biases, as little-endian f64.

use std::path::Path;

use super::{CnnModel, LayerKind, LayerSpec, Shape};
use crate::io::{put_f64, put_u32, read_file, write_file, ByteReader};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"M2FN";
pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAX_NAME_LEN: usize = 256;

impl CnnModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, MODEL_FORMAT_VERSION);
        let s = self.input_shape();
        for v in [s.channels, s.height, s.width] {
            put_u32(&mut out, v as u32);
        }
        put_u32(&mut out, self.layers().len() as u32);
        for l in self.layers() {
            put_u32(&mut out, l.kind.code());
            put_u32(&mut out, l.name.len() as u32);
            out.extend_from_slice(l.name.as_bytes());
            for v in [
                l.kernel.0,
                l.kernel.1,
                l.in_channels,
                l.out_channels,
                l.stride.0,
                l.stride.1,
            ] {
                put_u32(&mut out, v as u32);
            }
        }
        for p in self.params() {
            for &w in p.weights.iter().chain(&p.bias) {
                put_f64(&mut out, w);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<CnnModel> {
        let what = "model file";
        let mut r = ByteReader::new(bytes, what);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::format(
                what,
                format!("unsupported version {version}"),
            ));
        }
        let input = Shape::new(r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let n_layers = r.u32()? as usize;
        // every layer record takes at least 32 bytes
        if n_layers.saturating_mul(32) > r.remaining() {
            return Err(Error::format(
                what,
                format!("{n_layers} layers exceed the payload"),
            ));
        }
        let mut specs = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let kind = LayerKind::from_code(r.u32()?)
                .ok_or_else(|| Error::format(what, "unknown layer kind"))?;
            let name_len = r.u32()? as usize;
            if name_len > MAX_NAME_LEN {
                return Err(Error::format(
                    what,
                    format!("layer name of {name_len} bytes"),
                ));
            }
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::format(what, "layer name is not UTF-8"))?
                .to_string();
            let mut f = [0usize; 6];
            for v in f.iter_mut() {
                *v = r.u32()? as usize;
            }
            specs.push(LayerSpec {
                name,
                kind,
                kernel: (f[0], f[1]),
                in_channels: f[2],
                out_channels: f[3],
                stride: (f[4], f[5]),
            });
        }
        let declared: Vec<usize> = specs.iter().map(|s| s.in_channels).collect();
        if input.len().saturating_mul(8) > bytes.len() * 64 {
            return Err(Error::format(what, "input shape is implausibly large"));
        }
        let mut model =
            CnnModel::new(input, specs).map_err(|e| Error::format(what, e.to_string()))?;
        if model
            .layers()
            .iter()
            .zip(&declared)
            .any(|(l, &d)| l.in_channels != d)
        {
            return Err(Error::format(what, "layer table does not chain"));
        }
        let needed = model.parameter_count();
        if needed.saturating_mul(8) != r.remaining() {
            return Err(Error::format(
                what,
                format!(
                    "expected {needed} parameters, found {} bytes",
                    r.remaining()
                ),
            ));
        }
        for p in model.params_mut() {
            for w in p.weights.iter_mut().chain(p.bias.iter_mut()) {
                *w = r.f64()?;
                if !w.is_finite() {
                    return Err(Error::format(what, "non-finite parameter"));
                }
            }
        }
        r.finish()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CnnModel> {
        let path = path.as_ref();
        CnnModel::from_bytes(&read_file(path)?).map_err(|e| Error::InvalidFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use crate::cnn::{build_1d_cnn_with, build_signal_cnn_with, CnnModel, Shape};

    #[test]
    fn round_trip() {
        let mut m = build_signal_cnn_with(Shape::new(3, 24, 52), (2, 3), 5, 4).unwrap();
        m.init_weights(1);
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..4], b"M2FN");
        assert_eq!(CnnModel::from_bytes(&bytes).unwrap(), m);
        let mut one_d = build_1d_cnn_with(52, 6, (2, 2), 3).unwrap();
        one_d.init_weights(2);
        assert_eq!(CnnModel::from_bytes(&one_d.to_bytes()).unwrap(), one_d);
    }

    #[test]
    fn rejects_corruption() {
        let mut m = build_1d_cnn_with(52, 6, (2, 2), 3).unwrap();
        m.init_weights(3);
        let bytes = m.to_bytes();
        assert!(CnnModel::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(CnnModel::from_bytes(&bad_version).is_err());
        let mut bad_kind = bytes.clone();
        // first layer kind follows magic, version, 3 shape words, layer count
        bad_kind[24] = 77;
        assert!(CnnModel::from_bytes(&bad_kind).is_err());
        assert!(CnnModel::from_bytes(b"M2FN").is_err());
    }
}
