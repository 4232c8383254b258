//! `.inr` model files: a magic line, a JSON header, a blank line, then
//! every parameter as little-endian `f64` in the flat storage order
//! (`W1, b1, ..., W_out, b_out`, weights row-major).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MlpArchitecture, MlpModel};
use crate::error::{Error, Result};
use crate::geometry::DomainTransform;

const MAGIC: &str = "VINR-INR";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    arch: MlpArchitecture,
    transform: DomainTransform,
    channel_names: Vec<String>,
    parameter_count: usize,
}

pub fn encode_model(model: &MlpModel) -> Vec<u8> {
    let header = Header {
        format_version: FORMAT_VERSION,
        arch: model.arch().clone(),
        transform: model.transform,
        channel_names: model.channel_names.clone(),
        parameter_count: model.params().len(),
    };
    let json = serde_json::to_string_pretty(&header).expect("header serialises");
    let mut out = Vec::with_capacity(json.len() + 16 + 8 * model.params().len());
    out.extend_from_slice(MAGIC.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(json.as_bytes());
    out.extend_from_slice(b"\n\n");
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<MlpModel> {
    let bad = |m: String| Error::ModelFormat(m);
    let magic_end = MAGIC.len() + 1;
    if bytes.len() < magic_end || &bytes[..MAGIC.len()] != MAGIC.as_bytes() || bytes[MAGIC.len()] != b'\n' {
        return Err(bad("missing VINR-INR magic line".into()));
    }
    let split = bytes[magic_end..]
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| bad("header is not terminated by a blank line".into()))?;
    let header_text = std::str::from_utf8(&bytes[magic_end..magic_end + split])
        .map_err(|e| bad(format!("header is not UTF-8: {e}")))?;
    let header: Header =
        serde_json::from_str(header_text).map_err(|e| bad(format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    header.arch.validate()?;
    let expected = header.arch.parameter_count();
    if header.parameter_count != expected {
        return Err(bad(format!(
            "header lists {} parameters but the architecture has {expected}",
            header.parameter_count
        )));
    }
    let blob = &bytes[magic_end + split + 2..];
    if blob.len() != 8 * expected {
        return Err(bad(format!(
            "parameter blob has {} bytes, expected {}",
            blob.len(),
            8 * expected
        )));
    }
    let params = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if !header.channel_names.is_empty() && header.channel_names.len() != header.arch.output_channels {
        return Err(bad(format!(
            "{} channel names for {} channels",
            header.channel_names.len(),
            header.arch.output_channels
        )));
    }
    let transform = DomainTransform::new(
        header.transform.scale,
        header.transform.center,
        header.transform.half_extent,
    )?;
    Ok(MlpModel::from_params(header.arch, params)
        .map_err(|e| bad(e.to_string()))?
        .with_transform(transform)
        .with_channel_names(header.channel_names))
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::super::{Activation, InitScheme};
    use super::*;
    use crate::geometry::Point3;

    fn sample_model() -> MlpModel {
        let arch = MlpArchitecture::new(4, 16, 3).with_activation(Activation::Softplus { beta: 100.0 });
        MlpModel::init(arch, 3, InitScheme::Sphere)
            .unwrap()
            .with_transform(DomainTransform::new(0.123, Point3::new(1.5, -2.0, 1.0 / 3.0), 0.9).unwrap())
            .with_channel_names(vec!["lumen".into(), "inner_wall".into(), "outer_wall".into()])
    }

    #[test]
    fn round_trip_is_exact() {
        let m = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.inr");
        save_model(&m, &p).unwrap();
        let back = load_model(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.channel_names, vec!["lumen", "inner_wall", "outer_wall"]);
        let pts: Vec<Point3> = (0..100)
            .map(|i| Point3::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos(), i as f64 / 100.0 - 0.5))
            .collect();
        let (a, b) = (m.forward_batch(&pts), back.forward_batch(&pts));
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = encode_model(&sample_model());
        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(decode_model(&wrong_magic), Err(Error::ModelFormat(_))));
        assert!(decode_model(&bytes[..bytes.len() - 8]).is_err());

        let text = String::from_utf8_lossy(&bytes).into_owned();
        let versioned = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        let mut v2 = versioned.as_bytes()[..versioned.find("\n\n").unwrap() + 2].to_vec();
        v2.extend_from_slice(&bytes[bytes.len() - 8 * sample_model().params().len()..]);
        assert!(matches!(decode_model(&v2), Err(Error::ModelFormat(m)) if m.contains("version")));

        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_model(&nan).is_err());
    }
}
