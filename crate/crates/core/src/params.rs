//! The versioned hash parameter set, its text encoding, and its digest.
//!
//! Every backend setup folds [`HashParams::digest`] into its parameter digest, so a proof made
//! under one permutation instance never verifies under another.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::field::{FieldElement, MODULUS};
use crate::hash::{hash_with_domain, Digest, Domain, DIGEST_LEN};
use crate::poseidon;

pub const PARAMS_VERSION: u32 = 1;
const HEADER: &str = "# sslc hash parameters";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashParams {
    pub version: u32,
    pub modulus: u64,
    pub width: usize,
    pub rate: usize,
    pub full_rounds: usize,
    pub partial_rounds: usize,
    pub sbox_degree: u64,
    pub digest_len: usize,
    pub mds_circ: Vec<u64>,
    pub mds_diag: Vec<u64>,
    pub round_constants_digest: Digest,
    pub domains: Vec<(String, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParamError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("unsupported parameter version {0}")]
    Version(u32),
    #[error("parameter file does not match the compiled permutation (field `{0}`)")]
    Mismatch(&'static str),
}

impl HashParams {
    /// Parameters of the permutation compiled into this build.
    pub fn current() -> Self {
        let rc: Vec<FieldElement> =
            poseidon::ROUND_CONSTANTS.iter().map(|&c| FieldElement::new(c)).collect();
        Self {
            version: PARAMS_VERSION,
            modulus: MODULUS,
            width: poseidon::WIDTH,
            rate: poseidon::RATE,
            full_rounds: 2 * poseidon::HALF_FULL_ROUNDS,
            partial_rounds: poseidon::PARTIAL_ROUNDS,
            sbox_degree: poseidon::SBOX_DEGREE,
            digest_len: DIGEST_LEN,
            mds_circ: poseidon::MDS_CIRC.to_vec(),
            mds_diag: poseidon::MDS_DIAG.to_vec(),
            round_constants_digest: hash_with_domain(Domain::Params, &rc),
            domains: Domain::ALL.iter().map(|d| (d.name().to_string(), *d as u64)).collect(),
        }
    }

    pub fn to_elements(&self) -> Vec<FieldElement> {
        let mut out: Vec<FieldElement> = [
            self.version as u64,
            self.modulus,
            self.width as u64,
            self.rate as u64,
            self.full_rounds as u64,
            self.partial_rounds as u64,
            self.sbox_degree,
            self.digest_len as u64,
        ]
        .iter()
        .map(|&v| FieldElement::new(v))
        .collect();
        out.extend(self.mds_circ.iter().chain(&self.mds_diag).map(|&v| FieldElement::new(v)));
        out.extend_from_slice(&self.round_constants_digest.0);
        for (name, tag) in &self.domains {
            out.extend(name.bytes().map(|b| FieldElement::new(b as u64)));
            out.push(FieldElement::new(*tag));
        }
        out
    }

    pub fn digest(&self) -> Digest {
        hash_with_domain(Domain::Params, &self.to_elements())
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[u64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER}");
        let _ = writeln!(s, "version = {}", self.version);
        let _ = writeln!(s, "field_modulus = {:#x}", self.modulus);
        let _ = writeln!(s, "permutation = poseidon");
        let _ = writeln!(s, "width = {}", self.width);
        let _ = writeln!(s, "rate = {}", self.rate);
        let _ = writeln!(s, "full_rounds = {}", self.full_rounds);
        let _ = writeln!(s, "partial_rounds = {}", self.partial_rounds);
        let _ = writeln!(s, "sbox_degree = {}", self.sbox_degree);
        let _ = writeln!(s, "digest_len = {}", self.digest_len);
        let _ = writeln!(s, "mds_circ = {}", join(&self.mds_circ));
        let _ = writeln!(s, "mds_diag = {}", join(&self.mds_diag));
        let _ = writeln!(s, "round_constants_digest = {}", self.round_constants_digest);
        for (name, tag) in &self.domains {
            let _ = writeln!(s, "domain.{name} = {tag}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, ParamError> {
        let mut kv: Vec<(usize, &str, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ParamError::Syntax {
                line: i + 1,
                msg: "expected `key = value`".to_string(),
            })?;
            kv.push((i + 1, k.trim(), v.trim()));
        }
        let get = |key: &'static str| {
            kv.iter()
                .find(|(_, k, _)| *k == key)
                .map(|(l, _, v)| (*l, *v))
                .ok_or(ParamError::Missing(key))
        };
        let num = |key: &'static str| -> Result<u64, ParamError> {
            let (line, v) = get(key)?;
            parse_u64(v).ok_or_else(|| ParamError::Syntax { line, msg: format!("bad number `{v}`") })
        };
        let list = |key: &'static str| -> Result<Vec<u64>, ParamError> {
            let (line, v) = get(key)?;
            v.split(',')
                .map(|x| {
                    parse_u64(x.trim()).ok_or_else(|| ParamError::Syntax {
                        line,
                        msg: format!("bad list entry `{x}`"),
                    })
                })
                .collect()
        };

        let version = num("version")? as u32;
        if version != PARAMS_VERSION {
            return Err(ParamError::Version(version));
        }
        let (line, perm) = get("permutation")?;
        if perm != "poseidon" {
            return Err(ParamError::Syntax { line, msg: format!("unknown permutation `{perm}`") });
        }
        let (line, rcd) = get("round_constants_digest")?;
        let round_constants_digest = rcd
            .parse()
            .map_err(|e| ParamError::Syntax { line, msg: format!("{e}") })?;
        let mut domains = Vec::new();
        for (line, k, v) in &kv {
            if let Some(name) = k.strip_prefix("domain.") {
                let tag = parse_u64(v).ok_or_else(|| ParamError::Syntax {
                    line: *line,
                    msg: format!("bad domain tag `{v}`"),
                })?;
                domains.push((name.to_string(), tag));
            }
        }
        Ok(Self {
            version,
            modulus: num("field_modulus")?,
            width: num("width")? as usize,
            rate: num("rate")? as usize,
            full_rounds: num("full_rounds")? as usize,
            partial_rounds: num("partial_rounds")? as usize,
            sbox_degree: num("sbox_degree")?,
            digest_len: num("digest_len")? as usize,
            mds_circ: list("mds_circ")?,
            mds_diag: list("mds_diag")?,
            round_constants_digest,
            domains,
        })
    }

    /// Checks a loaded parameter file against the compiled permutation.
    pub fn check_matches_build(&self) -> Result<(), ParamError> {
        let cur = Self::current();
        let checks: [(&'static str, bool); 10] = [
            ("field_modulus", self.modulus == cur.modulus),
            ("width", self.width == cur.width),
            ("rate", self.rate == cur.rate),
            ("full_rounds", self.full_rounds == cur.full_rounds),
            ("partial_rounds", self.partial_rounds == cur.partial_rounds),
            ("sbox_degree", self.sbox_degree == cur.sbox_degree),
            ("digest_len", self.digest_len == cur.digest_len),
            ("mds", self.mds_circ == cur.mds_circ && self.mds_diag == cur.mds_diag),
            ("round_constants_digest", self.round_constants_digest == cur.round_constants_digest),
            ("domains", self.domains == cur.domains),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(ParamError::Mismatch(name)),
            None => Ok(()),
        }
    }
}

fn parse_u64(s: &str) -> Option<u64> {
    match s.strip_prefix("0x") {
        Some(h) => u64::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let p = HashParams::current();
        let back = HashParams::parse(&p.to_text()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.digest(), p.digest());
        back.check_matches_build().unwrap();
    }

    #[test]
    fn tampered_file_is_detected() {
        let text = HashParams::current().to_text().replace("partial_rounds = 22", "partial_rounds = 21");
        let p = HashParams::parse(&text).unwrap();
        assert_eq!(p.check_matches_build(), Err(ParamError::Mismatch("partial_rounds")));
        assert_ne!(p.digest(), HashParams::current().digest());
    }

    #[test]
    fn rejects_other_versions() {
        let text = HashParams::current().to_text().replace("version = 1", "version = 2");
        assert_eq!(HashParams::parse(&text), Err(ParamError::Version(2)));
    }
}
