//! Clip delivery with single-range support and cached Anchor-X renders.

use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::Response;
use mushra_core::protocol::{make_anchor_x, read_wav, write_wav, AudioRef};
use mushra_core::rng::str_stream;

use crate::ServerError;

/// Bytes of the clip behind `audio`, rendering and caching anchors on first use.
pub fn clip_bytes(audio: &AudioRef, cache_dir: &Path) -> Result<Vec<u8>, ServerError> {
    let path = match audio {
        AudioRef::File(p) => PathBuf::from(p),
        AudioRef::AnchorXOf(source) => {
            let cached = cache_dir.join(format!("{:016x}.wav", str_stream(source)));
            if !cached.is_file() {
                std::fs::create_dir_all(cache_dir).map_err(|e| mushra_core::Error::io(cache_dir, e))?;
                let (clip, format) = read_wav(source)?;
                let anchor = make_anchor_x(&clip)?;
                let tmp = cached.with_extension("wav.tmp");
                write_wav(&tmp, &anchor, format)?;
                std::fs::rename(&tmp, &cached).map_err(|e| mushra_core::Error::io(&cached, e))?;
            }
            cached
        }
    };
    std::fs::read(&path).map_err(|e| mushra_core::Error::io(&path, e).into())
}

/// Parses `bytes=a-b`, `bytes=a-` and `bytes=-n` against a body of `len` bytes.
/// `Err(())` means unsatisfiable.
pub fn parse_range(value: &str, len: usize) -> Option<Result<(usize, usize), ()>> {
    let spec = value.trim().strip_prefix("bytes=")?;
    if spec.contains(',') {
        return None;
    }
    let (a, b) = spec.split_once('-')?;
    let (a, b) = (a.trim(), b.trim());
    let range = match (a.is_empty(), b.is_empty()) {
        (true, true) => return None,
        (true, false) => {
            let n: usize = b.parse().ok()?;
            if n == 0 || len == 0 {
                return Some(Err(()));
            }
            (len.saturating_sub(n), len - 1)
        }
        (false, _) => {
            let start: usize = a.parse().ok()?;
            let end = if b.is_empty() { len.saturating_sub(1) } else { b.parse::<usize>().ok()?.min(len.saturating_sub(1)) };
            if start >= len || end < start {
                return Some(Err(()));
            }
            (start, end)
        }
    };
    Some(Ok(range))
}

pub fn respond(bytes: Vec<u8>, headers: &HeaderMap) -> Response {
    let len = bytes.len();
    let range = headers
        .get(header::RANGE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| parse_range(v, len));
    let builder = Response::builder()
        .header(header::CONTENT_TYPE, HeaderValue::from_static("audio/wav"))
        .header(header::ACCEPT_RANGES, HeaderValue::from_static("bytes"))
        .header(header::CACHE_CONTROL, HeaderValue::from_static("private, max-age=3600"));
    let resp = match range {
        None => builder
            .status(StatusCode::OK)
            .header(header::CONTENT_LENGTH, len)
            .body(Body::from(bytes)),
        Some(Ok((start, end))) => builder
            .status(StatusCode::PARTIAL_CONTENT)
            .header(header::CONTENT_RANGE, format!("bytes {start}-{end}/{len}"))
            .header(header::CONTENT_LENGTH, end - start + 1)
            .body(Body::from(bytes[start..=end].to_vec())),
        Some(Err(())) => builder
            .status(StatusCode::RANGE_NOT_SATISFIABLE)
            .header(header::CONTENT_RANGE, format!("bytes */{len}"))
            .body(Body::empty()),
    };
    resp.expect("static headers are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("bytes=0-9", 100), Some(Ok((0, 9))));
        assert_eq!(parse_range("bytes=90-", 100), Some(Ok((90, 99))));
        assert_eq!(parse_range("bytes=-10", 100), Some(Ok((90, 99))));
        assert_eq!(parse_range("bytes=95-200", 100), Some(Ok((95, 99))));
        assert_eq!(parse_range("bytes=100-", 100), Some(Err(())));
        assert_eq!(parse_range("bytes=5-2", 100), Some(Err(())));
        assert_eq!(parse_range("bytes=0-1,4-5", 100), None);
        assert_eq!(parse_range("items=0-1", 100), None);
    }
}
