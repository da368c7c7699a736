//! Self-describing byte snapshot of a network.
//!
//! Layout (little endian): `b"RLNB"`, `u32` version, `u32` input, `u32` hidden
//! count, each hidden width as `u32`, `u32` output, `u8` activation, `u8` head,
//! `u64` parameter count, then the parameters as raw `f64` bits.

use alloc::vec::Vec;

use super::{Activation, Arch, HeadKind, NetParams, NnError};

pub const BLOB_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"RLNB";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamBlob(pub Vec<u8>);

impl ParamBlob {
    pub fn encode(net: &NetParams) -> Self {
        let a = &net.arch;
        let mut out = Vec::with_capacity(32 + 8 * net.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        out.extend_from_slice(&(a.input as u32).to_le_bytes());
        out.extend_from_slice(&(a.hidden.len() as u32).to_le_bytes());
        for &h in &a.hidden {
            out.extend_from_slice(&(h as u32).to_le_bytes());
        }
        out.extend_from_slice(&(a.output as u32).to_le_bytes());
        out.push(match a.activation {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        });
        out.push(match a.head {
            HeadKind::PolicyLogits => 0,
            HeadKind::StateValue => 1,
            HeadKind::QValues => 2,
        });
        out.extend_from_slice(&(net.params.len() as u64).to_le_bytes());
        for p in &net.params {
            out.extend_from_slice(&p.to_bits().to_le_bytes());
        }
        Self(out)
    }

    pub fn decode(&self) -> Result<NetParams, NnError> {
        let mut r = Reader { buf: &self.0, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(NnError::Blob("bad magic"));
        }
        if r.u32()? != BLOB_VERSION {
            return Err(NnError::Blob("unsupported version"));
        }
        let input = r.u32()? as usize;
        let n_hidden = r.u32()? as usize;
        if n_hidden > 64 {
            return Err(NnError::Blob("implausible layer count"));
        }
        let mut hidden = Vec::with_capacity(n_hidden);
        for _ in 0..n_hidden {
            hidden.push(r.u32()? as usize);
        }
        let output = r.u32()? as usize;
        let activation = match r.take(1)?[0] {
            0 => Activation::Tanh,
            1 => Activation::Relu,
            _ => return Err(NnError::Blob("unknown activation")),
        };
        let head = match r.take(1)?[0] {
            0 => HeadKind::PolicyLogits,
            1 => HeadKind::StateValue,
            2 => HeadKind::QValues,
            _ => return Err(NnError::Blob("unknown head")),
        };
        let arch = Arch { input, hidden, output, activation, head };
        arch.validate()?;
        let n = r.u64()? as usize;
        if n != arch.param_count() {
            return Err(NnError::ArchMismatch);
        }
        let mut params = Vec::with_capacity(n);
        for _ in 0..n {
            params.push(f64::from_bits(r.u64()?));
        }
        if r.pos != self.0.len() {
            return Err(NnError::Blob("trailing bytes"));
        }
        Ok(NetParams { arch, params })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.buf.len() {
            return Err(NnError::Blob("truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}
