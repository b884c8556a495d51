//! Versioned binary files holding composition tables, one per operation.
//!
//! Layout (little endian): `FVCT`, version u32, mode u8, rank u32, marks
//! u32, alphabet digest [32], op name, record count u32, then records sorted
//! by key. A record is step u8, root marks u64, input count u32, inputs,
//! output; each type is its canonical bytes followed by the text of its
//! representative (empty when unknown). Strings and byte blobs carry a u32
//! length prefix.

use std::fs;
use std::path::{Path, PathBuf};

use super::{ComposeKey, TypeEngine};
use crate::eftypes::TypeFingerprint;
use crate::error::{Error, Result};
use crate::logic::LogicMode;
use crate::optrees::CombineStep;
use crate::structures::{parse_structure, write_structure, Structure};

const MAGIC: &[u8; 4] = b"FVCT";
const VERSION: u32 = 1;

pub fn table_file_name(engine: &TypeEngine, op: usize) -> String {
    let digest: String = engine.spec().digest()[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    format!(
        "{digest}-{}-m{}-k{}-{}.fvct",
        engine.mode(),
        engine.rank(),
        engine.marks(),
        engine.spec().op(op).name
    )
}

fn step_code(s: CombineStep) -> u8 {
    match s {
        CombineStep::Apply => 0,
        CombineStep::Init => 1,
        CombineStep::Step => 2,
        CombineStep::Close => 3,
    }
}

fn step_from(c: u8) -> Result<CombineStep> {
    Ok(match c {
        0 => CombineStep::Apply,
        1 => CombineStep::Init,
        2 => CombineStep::Step,
        3 => CombineStep::Close,
        _ => return Err(Error::Table(format!("unknown step code {c}"))),
    })
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
}

/// Encode the table of `op`; identical tables give identical bytes.
pub(crate) fn encode(engine: &TypeEngine, op: usize) -> Vec<u8> {
    let table = engine.table(op);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(matches!(engine.mode(), LogicMode::Mso) as u8);
    out.extend_from_slice(&engine.rank().to_le_bytes());
    out.extend_from_slice(&engine.marks().to_le_bytes());
    out.extend_from_slice(&engine.spec().digest());
    put_bytes(&mut out, table.op.as_bytes());
    out.extend_from_slice(&(table.entries.len() as u32).to_le_bytes());
    let put_type = |out: &mut Vec<u8>, t: &TypeFingerprint| {
        put_bytes(out, t.canonical());
        let rep = table
            .representatives
            .get(t)
            .map(write_structure)
            .unwrap_or_default();
        put_bytes(out, rep.as_bytes());
    };
    for (key, value) in &table.entries {
        out.push(step_code(key.step));
        out.extend_from_slice(&key.root_marks.to_le_bytes());
        out.extend_from_slice(&(key.inputs.len() as u32).to_le_bytes());
        for t in &key.inputs {
            put_type(&mut out, t);
        }
        put_type(&mut out, value);
    }
    out
}

/// Write every operation's table into `dir`; returns the written paths.
pub fn save_tables(engine: &TypeEngine, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for op in 0..engine.spec().ops().len() {
        let path = dir.join(table_file_name(engine, op));
        let tmp = path.with_extension("fvct.tmp");
        fs::write(&tmp, encode(engine, op))?;
        fs::rename(&tmp, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Load whichever tables for `engine` exist in `dir`; returns the number of
/// entries read. Files written for a different alphabet, logic, rank or
/// mark count are rejected.
pub fn load_tables(engine: &TypeEngine, dir: &Path) -> Result<usize> {
    let mut total = 0;
    for op in 0..engine.spec().ops().len() {
        let path = dir.join(table_file_name(engine, op));
        if !path.exists() {
            continue;
        }
        let bytes = fs::read(&path)?;
        total += decode_into(engine, op, &bytes)
            .map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
    }
    Ok(total)
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.b.len());
        let end = end.ok_or_else(|| Error::Table("truncated file".into()))?;
        let s = &self.b[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn blob(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }
}

pub(crate) fn decode_into(engine: &TypeEngine, op: usize, bytes: &[u8]) -> Result<usize> {
    let mut r = Reader { b: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Table("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Table(format!("unsupported version {version}")));
    }
    let mso = r.u8()? == 1;
    let rank = r.u32()?;
    let marks = r.u32()?;
    let digest = r.take(32)?;
    let name = r.blob()?;
    if mso != (engine.mode() == LogicMode::Mso)
        || rank != engine.rank()
        || marks != engine.marks()
        || digest != engine.spec().digest()
        || name != engine.spec().op(op).name.as_bytes()
    {
        return Err(Error::Table(
            "header does not match this alphabet, logic, rank and operation".into(),
        ));
    }
    let count = r.u32()? as usize;
    let read_type = |r: &mut Reader| -> Result<(TypeFingerprint, Option<Structure>)> {
        let t = TypeFingerprint::from_canonical(r.blob()?)?;
        if t.rank() != engine.rank() || t.mode() != engine.mode() {
            return Err(Error::Table("type of the wrong logic or rank".into()));
        }
        let text = std::str::from_utf8(r.blob()?).map_err(|_| Error::Table("bad utf-8".into()))?;
        let rep = if text.is_empty() {
            None
        } else {
            Some(parse_structure(text)?)
        };
        Ok((t, rep))
    };
    for _ in 0..count {
        let step = step_from(r.u8()?)?;
        let root_marks = r.u64()?;
        let n = r.u32()? as usize;
        let mut inputs = Vec::with_capacity(n);
        for _ in 0..n {
            let (t, rep) = read_type(&mut r)?;
            if let Some(s) = rep {
                engine.offer_representative(&t, &s);
            }
            inputs.push(t);
        }
        let (out, rep) = read_type(&mut r)?;
        let key = ComposeKey {
            step,
            root_marks,
            inputs,
        };
        engine.insert_entry(op, key, out, rep.as_ref())?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Table("trailing bytes".into()));
    }
    Ok(count)
}
