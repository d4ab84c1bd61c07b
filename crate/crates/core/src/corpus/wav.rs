//! Minimal RIFF/WAVE reader and writer for 16-bit linear PCM.

use super::AudioRecording;
use crate::error::{Error, Result};

const WAVE_FORMAT_PCM: u16 = 0x0001;
const WAVE_FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk> {
    if body.len() < 16 {
        return Err(Error::Format(format!("fmt chunk too short ({} bytes)", body.len())));
    }
    let mut format = u16_at(body, 0);
    if format == WAVE_FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then the sub-format GUID
        if body.len() < 40 {
            return Err(Error::Format("truncated WAVE_FORMAT_EXTENSIBLE header".into()));
        }
        format = u16_at(body, 24);
    }
    Ok(FmtChunk {
        format,
        channels: u16_at(body, 2),
        sample_rate: u32_at(body, 4),
        bits_per_sample: u16_at(body, 14),
    })
}

/// Decodes a RIFF/WAVE payload into a mono recording.
///
/// Channels are averaged; 16-bit samples are scaled by 1/32768.
pub fn load_wav(id: &str, raw: &[u8]) -> Result<AudioRecording> {
    if raw.len() < 12 || &raw[0..4] != b"RIFF" || &raw[8..12] != b"WAVE" {
        return Err(Error::Format("missing RIFF/WAVE signature".into()));
    }

    let mut fmt = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= raw.len() {
        let tag = &raw[pos..pos + 4];
        let size = u32_at(raw, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start.saturating_add(size);
        match tag {
            b"fmt " => {
                if body_end > raw.len() {
                    return Err(Error::Format("fmt chunk runs past end of file".into()));
                }
                fmt = Some(parse_fmt(&raw[body_start..body_end])?);
            }
            b"data" => {
                // some writers leave a bogus size on streamed files; take what is there
                data = Some(&raw[body_start..body_end.min(raw.len())]);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body_end.saturating_add(size & 1);
    }

    let fmt = fmt.ok_or_else(|| Error::Format("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("no data chunk".into()))?;

    if fmt.format != WAVE_FORMAT_PCM {
        return Err(Error::Unsupported(format!(
            "format tag 0x{:04x}, only linear PCM is supported",
            fmt.format
        )));
    }
    if fmt.bits_per_sample != 16 {
        return Err(Error::Unsupported(format!(
            "{}-bit samples, only 16-bit is supported",
            fmt.bits_per_sample
        )));
    }
    if fmt.channels == 0 {
        return Err(Error::Format("zero channels".into()));
    }
    if fmt.sample_rate == 0 {
        return Err(Error::Format("zero sample rate".into()));
    }

    let channels = fmt.channels as usize;
    let frame_bytes = 2 * channels;
    let frames = data.len() / frame_bytes;
    if frames == 0 {
        return Err(Error::EmptyInput(format!("{id}: no audio frames")));
    }

    let samples = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(2)
                .map(|s| f64::from(i16::from_le_bytes([s[0], s[1]])) / 32768.0)
                .sum();
            sum / channels as f64
        })
        .collect();

    AudioRecording::new(id, samples, fmt.sample_rate)
}

/// Encodes interleaved channels as 16-bit PCM. Values are clamped to the
/// representable range after scaling by 32768.
pub fn encode_wav(channels: &[&[f64]], sample_rate: u32) -> Vec<u8> {
    let n_ch = channels.len().max(1);
    let frames = channels.first().map_or(0, |c| c.len());
    let data_len = frames * n_ch * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&WAVE_FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&(n_ch as u16).to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * n_ch as u32 * 2).to_le_bytes());
    out.extend_from_slice(&((n_ch * 2) as u16).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for i in 0..frames {
        for ch in channels {
            let v = (ch[i] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duration_from_header() {
        let x = vec![0.1; 8000];
        let rec = load_wav("a", &encode_wav(&[&x], 4000)).unwrap();
        assert_eq!(rec.sample_rate, 4000);
        assert_eq!(rec.samples.len(), 8000);
        assert_eq!(rec.duration(), 2.0);
    }

    #[test]
    fn stereo_opposite_channels_average_to_zero() {
        let l = vec![0.5; 100];
        let r = vec![-0.5; 100];
        let rec = load_wav("s", &encode_wav(&[&l, &r], 4000)).unwrap();
        assert!(rec.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_scale_negative_is_minus_one() {
        let mut bytes = encode_wav(&[&[0.0, 0.0]], 4000);
        let n = bytes.len();
        bytes[n - 2..].copy_from_slice(&(-32768i16).to_le_bytes());
        bytes[n - 4..n - 2].copy_from_slice(&16384i16.to_le_bytes());
        let rec = load_wav("m", &bytes).unwrap();
        assert_eq!(rec.samples, vec![16384.0 / 32768.0, -1.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(load_wav("x", b"nonsense"), Err(Error::Format(_))));

        let mut float = encode_wav(&[&[0.1; 4]], 4000);
        float[20..22].copy_from_slice(&3u16.to_le_bytes());
        assert!(matches!(load_wav("x", &float), Err(Error::Unsupported(_))));

        let mut eight_bit = encode_wav(&[&[0.1; 4]], 4000);
        eight_bit[34..36].copy_from_slice(&8u16.to_le_bytes());
        assert!(matches!(load_wav("x", &eight_bit), Err(Error::Unsupported(_))));

        let empty = encode_wav(&[&[]], 4000);
        assert!(matches!(load_wav("x", &empty), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let plain = encode_wav(&[&[0.25, -0.25, 0.5]], 8000);
        let mut with_list = plain[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]); // odd size + pad byte
        with_list.extend_from_slice(&plain[36..]);
        let rec = load_wav("l", &with_list).unwrap();
        assert_eq!(rec.samples, vec![0.25, -0.25, 0.5]);
    }
}
