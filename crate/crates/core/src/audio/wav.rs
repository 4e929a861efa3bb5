use std::fs;
use std::path::Path;

use super::{AudioClip, AudioError};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_IEEE_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy)]
enum SampleFormat {
    Int,
    Float,
}

#[derive(Debug, Clone, Copy)]
struct FmtChunk {
    format: SampleFormat,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::MalformedHeader(format!(
            "fmt chunk is {} bytes, need at least 16",
            body.len()
        )));
    }
    let mut tag = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let bits = u16_at(body, 14);
    if tag == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then the subformat GUID,
        // whose first two bytes carry the real format tag.
        if body.len() < 26 {
            return Err(AudioError::MalformedHeader(
                "truncated WAVE_FORMAT_EXTENSIBLE".into(),
            ));
        }
        tag = u16_at(body, 24);
    }
    let format = match (tag, bits) {
        (FORMAT_PCM, 8 | 16 | 24 | 32) => SampleFormat::Int,
        (FORMAT_IEEE_FLOAT, 32 | 64) => SampleFormat::Float,
        (FORMAT_PCM | FORMAT_IEEE_FLOAT, _) => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "{bits}-bit samples"
            )))
        }
        _ => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "format tag {tag:#06x}"
            )))
        }
    };
    if channels == 0 || channels > 2 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{channels} channels"
        )));
    }
    if sample_rate == 0 {
        return Err(AudioError::MalformedHeader("sample rate is zero".into()));
    }
    Ok(FmtChunk {
        format,
        channels,
        sample_rate,
        bits,
    })
}

fn decode_sample(raw: &[u8], fmt: &FmtChunk) -> f64 {
    match (fmt.format, fmt.bits) {
        (SampleFormat::Int, 8) => (raw[0] as f64 - 128.0) / 128.0,
        (SampleFormat::Int, 16) => i16::from_le_bytes([raw[0], raw[1]]) as f64 / 32_768.0,
        (SampleFormat::Int, 24) => {
            let v = i32::from_le_bytes([0, raw[0], raw[1], raw[2]]) >> 8;
            v as f64 / 8_388_608.0
        }
        (SampleFormat::Int, _) => {
            i32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64 / 2_147_483_648.0
        }
        (SampleFormat::Float, 32) => f32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64,
        (SampleFormat::Float, _) => {
            let mut b = [0u8; 8];
            b.copy_from_slice(&raw[..8]);
            f64::from_le_bytes(b)
        }
    }
}

/// Decodes a RIFF/WAVE byte stream into a mono clip.
///
/// Stereo frames are averaged. Integer PCM is scaled by `2^(bits-1)`;
/// float samples are clipped into `[-1, 1]`.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 {
        return Err(AudioError::MalformedHeader(
            "shorter than the RIFF preamble".into(),
        ));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(AudioError::MalformedHeader(format!(
            "expected RIFF magic, found {:?}",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedHeader("missing WAVE form type".into()));
    }

    let mut fmt = None;
    let mut data = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start.saturating_add(size);
        match id {
            b"fmt " => {
                if body_end > bytes.len() {
                    return Err(AudioError::MalformedHeader(
                        "fmt chunk runs past end of file".into(),
                    ));
                }
                fmt = Some(parse_fmt(&bytes[body_start..body_end])?);
            }
            b"data" => {
                // Streaming writers leave the data size unset; take what is there.
                data = Some(&bytes[body_start..body_end.min(bytes.len())]);
            }
            _ => {}
        }
        if data.is_some() && fmt.is_some() {
            break;
        }
        pos = body_end.saturating_add(size & 1);
    }

    let fmt = fmt.ok_or_else(|| AudioError::MalformedHeader("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::MalformedHeader("no data chunk".into()))?;
    let width = fmt.bits as usize / 8;
    let frame = width * fmt.channels as usize;
    let samples = data
        .chunks_exact(frame)
        .map(|f| {
            let sum: f64 = f.chunks_exact(width).map(|s| decode_sample(s, &fmt)).sum();
            let v = sum / fmt.channels as f64;
            if v.is_finite() {
                v.clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    AudioClip::new(samples, fmt.sample_rate)
}

fn quantize(s: f64) -> i16 {
    // f64::round rounds half away from zero.
    (s * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16
}

/// Encodes a clip as 16-bit mono PCM with a canonical 44-byte header.
pub fn write_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = (clip.len() * 2) as u32;
    let rate = clip.sample_rate();
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in clip.samples() {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

pub fn read_wav_file(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_wav(&bytes)
}

pub fn write_wav_file(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    let path = path.as_ref();
    fs::write(path, write_wav(clip)).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })
}
