// SPDX-License-Identifier: Apache-2.0

//! Length-prefixed request/response framing shared by the shareholder and
//! evidence-service transports.
//!
//! A frame is a 4-byte big-endian length followed by a canonical encoding.
//! Requests are `Tuple[ByteString(op), args...]`; responses are
//! `Tuple["OK", payload]` or `Tuple["ERR", message]`.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};

use crate::encoding::{CanonicalValue, EncodingError};

pub const MAX_FRAME: usize = 256 << 20;

pub fn write_frame<W: Write>(w: &mut W, v: &CanonicalValue) -> io::Result<()> {
    let body = v.encode().map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    let len = u32::try_from(body.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()
}

/// Reads one frame; `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<CanonicalValue>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    CanonicalValue::decode(&body)
        .map(Some)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn request(op: &str, args: impl IntoIterator<Item = CanonicalValue>) -> CanonicalValue {
    CanonicalValue::tuple(std::iter::once(CanonicalValue::str(op)).chain(args))
}

/// Splits a request into its op name and arguments.
pub fn parse_request(v: &CanonicalValue) -> Result<(&str, &[CanonicalValue]), EncodingError> {
    let items = v.as_tuple()?;
    let (op, args) = items.split_first().ok_or(EncodingError::Shape("non-empty request"))?;
    Ok((op.as_str()?, args))
}

pub fn ok(payload: CanonicalValue) -> CanonicalValue {
    CanonicalValue::tuple([CanonicalValue::str("OK"), payload])
}

pub fn err(message: &str) -> CanonicalValue {
    CanonicalValue::tuple([CanonicalValue::str("ERR"), CanonicalValue::str(message)])
}

/// `Ok(payload)` for an OK response, `Err(message)` otherwise.
pub fn parse_response(v: CanonicalValue) -> Result<CanonicalValue, String> {
    let CanonicalValue::Tuple(mut items) = v else {
        return Err("malformed response".into());
    };
    if items.len() != 2 {
        return Err("malformed response".into());
    }
    let payload = items.pop().expect("len 2");
    match items[0].as_str() {
        Ok("OK") => Ok(payload),
        Ok("ERR") => Err(payload.as_str().unwrap_or("malformed error").to_owned()),
        _ => Err("malformed response".into()),
    }
}

/// One request over a fresh connection.
pub fn call<A: ToSocketAddrs>(addr: A, req: &CanonicalValue) -> io::Result<Result<CanonicalValue, String>> {
    let mut stream = TcpStream::connect(addr)?;
    write_frame(&mut stream, req)?;
    let resp = read_frame(&mut stream)?.ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "no response"))?;
    Ok(parse_response(resp))
}

/// Serves connections one at a time until `handler` asks to stop. Each
/// connection may carry several requests.
pub fn serve<F>(listener: TcpListener, mut handler: F) -> io::Result<()>
where
    F: FnMut(&CanonicalValue) -> (CanonicalValue, bool),
{
    for stream in listener.incoming() {
        let mut stream = stream?;
        let mut stop = false;
        loop {
            let req = match read_frame(&mut stream) {
                Ok(Some(r)) => r,
                Ok(None) => break,
                Err(e) => {
                    log::warn!("dropping connection: {e}");
                    break;
                }
            };
            let (resp, done) = handler(&req);
            if let Err(e) = write_frame(&mut stream, &resp) {
                log::warn!("reply failed: {e}");
                break;
            }
            if done {
                stop = true;
                break;
            }
        }
        if stop {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_roundtrip() {
        let v = request("GET", [CanonicalValue::str("a"), CanonicalValue::UInt(1)]);
        let mut buf = Vec::new();
        write_frame(&mut buf, &v).unwrap();
        assert_eq!(&buf[..4], &(v.encoded_len() as u32).to_be_bytes());
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r).unwrap(), Some(v.clone()));
        assert_eq!(read_frame(&mut r).unwrap(), None);
        let (op, args) = parse_request(&v).unwrap();
        assert_eq!(op, "GET");
        assert_eq!(args.len(), 2);
    }

    #[test]
    fn truncated_and_oversized() {
        let mut buf = Vec::new();
        write_frame(&mut buf, &CanonicalValue::str("abc")).unwrap();
        buf.pop();
        assert!(read_frame(&mut &buf[..]).is_err());
        let big = (MAX_FRAME as u32 + 1).to_be_bytes();
        assert!(read_frame(&mut &big[..]).is_err());
    }

    #[test]
    fn responses() {
        assert_eq!(parse_response(ok(CanonicalValue::UInt(3))), Ok(CanonicalValue::UInt(3)));
        assert_eq!(parse_response(err("nope")), Err("nope".into()));
        assert!(parse_response(CanonicalValue::UInt(3)).is_err());
    }
}
