// SPDX-License-Identifier: Apache-2.0

//! Evidence-service wire protocol: `ADD_COM`, `RENEW_TS`, `ADD_COM_RENEW`,
//! `GET_EVIDENCE`, plus `NAMES`.

use std::net::TcpListener;

use super::{evidence_from_value, evidence_value, EvidenceApi, EvidenceError, EvidenceEntry, EvidenceService, Result};
use crate::encoding::{CanonicalValue, EncodingError};
use crate::net;
use crate::timestamping::TimestampToken;
use crate::vector_com::VectorCommitment;

pub fn add_com_request(names: &[String], vc_scheme_id: &str, c: &VectorCommitment, ts_scheme_id: &str) -> CanonicalValue {
    net::request(
        "ADD_COM",
        [
            CanonicalValue::tuple(names.iter().map(|n| CanonicalValue::str(n))),
            CanonicalValue::str(vc_scheme_id),
            c.to_value(),
            CanonicalValue::str(ts_scheme_id),
        ],
    )
}

pub fn renew_ts_request(vc_scheme_id: &str, vc_params: &CanonicalValue, ts_scheme_id: &str) -> CanonicalValue {
    net::request(
        "RENEW_TS",
        [
            CanonicalValue::str(vc_scheme_id),
            vc_params.clone(),
            CanonicalValue::str(ts_scheme_id),
        ],
    )
}

pub fn add_com_renew_request(
    vc_scheme_id: &str,
    c: &VectorCommitment,
    positions: &[(String, u64)],
    ts_scheme_id: &str,
) -> CanonicalValue {
    net::request(
        "ADD_COM_RENEW",
        [
            CanonicalValue::str(vc_scheme_id),
            c.to_value(),
            CanonicalValue::tuple(
                positions
                    .iter()
                    .map(|(n, p)| CanonicalValue::tuple([CanonicalValue::str(n), CanonicalValue::UInt(*p)])),
            ),
            CanonicalValue::str(ts_scheme_id),
        ],
    )
}

pub fn get_evidence_request(name: &str) -> CanonicalValue {
    net::request("GET_EVIDENCE", [CanonicalValue::str(name)])
}

fn optional_token(t: Option<TimestampToken>) -> CanonicalValue {
    CanonicalValue::tuple(t.map(|t| t.to_value()))
}

fn dispatch(es: &mut EvidenceService, req: &CanonicalValue) -> Result<CanonicalValue> {
    let (op, args) = net::parse_request(req)?;
    let arg = |i: usize| {
        args.get(i)
            .ok_or(EvidenceError::Encoding(EncodingError::Shape("request argument")))
    };
    let strs = |v: &CanonicalValue| -> Result<Vec<String>, EncodingError> {
        v.as_tuple()?.iter().map(|n| n.as_str().map(str::to_owned)).collect()
    };
    Ok(match op {
        "ADD_COM" => es
            .add_com(
                &strs(arg(0)?)?,
                arg(1)?.as_str()?,
                &VectorCommitment::from_value(arg(2)?)?,
                arg(3)?.as_str()?,
            )?
            .to_value(),
        "RENEW_TS" => optional_token(es.renew_ts(arg(0)?.as_str()?, arg(1)?, arg(2)?.as_str()?)?),
        "ADD_COM_RENEW" => {
            let positions = arg(2)?
                .as_tuple()?
                .iter()
                .map(|p| {
                    let p = p.as_tuple_of(2)?;
                    Ok((p[0].as_str()?.to_owned(), p[1].as_uint()?))
                })
                .collect::<Result<Vec<_>, EncodingError>>()?;
            es.add_com_renew(
                arg(0)?.as_str()?,
                &VectorCommitment::from_value(arg(1)?)?,
                &positions,
                arg(3)?.as_str()?,
            )?
            .to_value()
        }
        "GET_EVIDENCE" => evidence_value(&es.get_evidence(arg(0)?.as_str()?)?),
        "NAMES" => CanonicalValue::tuple(es.names()?.iter().map(|n| CanonicalValue::str(n))),
        other => return Err(EvidenceError::Remote(format!("unknown op {other}"))),
    })
}

pub fn handle(es: &mut EvidenceService, req: &CanonicalValue) -> CanonicalValue {
    match dispatch(es, req) {
        Ok(v) => net::ok(v),
        Err(e) => net::err(&e.to_string()),
    }
}

/// Serves requests until the listener fails. `max_requests` bounds the run
/// for tests.
pub fn serve_evidence(listener: TcpListener, es: &mut EvidenceService, max_requests: Option<usize>) -> std::io::Result<()> {
    let mut served = 0usize;
    net::serve(listener, |req| {
        served += 1;
        (handle(es, req), max_requests.is_some_and(|m| served >= m))
    })
}

#[derive(Debug, Clone)]
pub struct RemoteEvidence {
    addr: String,
}

impl RemoteEvidence {
    pub fn new(addr: &str) -> Self {
        RemoteEvidence {
            addr: addr.trim_start_matches("tcp://").to_owned(),
        }
    }

    fn call(&self, req: CanonicalValue) -> Result<CanonicalValue> {
        net::call(&self.addr, &req)?.map_err(EvidenceError::Remote)
    }
}

fn token_opt(v: &CanonicalValue) -> Result<Option<TimestampToken>> {
    match v.as_tuple()? {
        [] => Ok(None),
        [t] => Ok(Some(TimestampToken::from_value(t)?)),
        _ => Err(EncodingError::Shape("at most one token").into()),
    }
}

impl EvidenceApi for RemoteEvidence {
    fn add_com(&mut self, names: &[String], vc_scheme_id: &str, c: &VectorCommitment, ts_scheme_id: &str) -> Result<TimestampToken> {
        let v = self.call(add_com_request(names, vc_scheme_id, c, ts_scheme_id))?;
        Ok(TimestampToken::from_value(&v)?)
    }

    fn renew_ts(&mut self, vc_scheme_id: &str, vc_params: &CanonicalValue, ts_scheme_id: &str) -> Result<Option<TimestampToken>> {
        token_opt(&self.call(renew_ts_request(vc_scheme_id, vc_params, ts_scheme_id))?)
    }

    fn add_com_renew(
        &mut self,
        vc_scheme_id: &str,
        c: &VectorCommitment,
        positions: &[(String, u64)],
        ts_scheme_id: &str,
    ) -> Result<TimestampToken> {
        let v = self.call(add_com_renew_request(vc_scheme_id, c, positions, ts_scheme_id))?;
        Ok(TimestampToken::from_value(&v)?)
    }

    fn get_evidence(&mut self, name: &str) -> Result<Vec<EvidenceEntry>> {
        Ok(evidence_from_value(&self.call(get_evidence_request(name))?)?)
    }

    fn names(&mut self) -> Result<Vec<String>> {
        let v = self.call(net::request("NAMES", []))?;
        Ok(v.as_tuple()?
            .iter()
            .map(|n| n.as_str().map(str::to_owned))
            .collect::<Result<_, _>>()?)
    }
}
