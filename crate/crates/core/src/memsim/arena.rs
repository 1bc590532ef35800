use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use super::program::{Outcome, Pid, Request};
use super::SimError;

/// Operation applied atomically to a black-box object cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjOp {
    Increment,
    Read,
    FetchAndIncrement,
    /// Dequeue / pop / delete-min, depending on the object.
    Remove,
    Insert(u64),
}

impl ObjOp {
    /// Numeric code used in the text trace format.
    pub fn code(self) -> u64 {
        match self {
            ObjOp::Increment => 0,
            ObjOp::Read => 1,
            ObjOp::FetchAndIncrement => 2,
            ObjOp::Remove => 3,
            ObjOp::Insert(_) => 4,
        }
    }

    pub fn arg(self) -> u64 {
        match self {
            ObjOp::Insert(v) => v,
            _ => 0,
        }
    }

    pub fn from_code(code: u64, arg: u64) -> Option<ObjOp> {
        Some(match code {
            0 => ObjOp::Increment,
            1 => ObjOp::Read,
            2 => ObjOp::FetchAndIncrement,
            3 => ObjOp::Remove,
            4 => ObjOp::Insert(arg),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjResponse {
    Ack,
    Value(u64),
    /// Removal from an empty structure.
    Empty,
}

impl ObjResponse {
    /// Signed encoding for the trace format: values as-is, `Ack` = -1, `Empty` = -2.
    pub fn encode(self) -> i64 {
        match self {
            ObjResponse::Value(v) => v as i64,
            ObjResponse::Ack => -1,
            ObjResponse::Empty => -2,
        }
    }

    pub fn decode(raw: i64) -> Option<ObjResponse> {
        match raw {
            -1 => Some(ObjResponse::Ack),
            -2 => Some(ObjResponse::Empty),
            v if v >= 0 => Some(ObjResponse::Value(v as u64)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectFault {
    #[error("operation {op:?} not supported by {object}")]
    Unsupported { object: String, op: ObjOp },
    #[error("relaxation violated: removal picked rank {rank} but slack allows at most {allowed}")]
    IllegalRank { rank: usize, allowed: usize },
}

/// A sequential object stored in an arena object cell. The simulator makes
/// each `apply` atomic.
pub trait SeqObject: SeqObjectExt + fmt::Debug + Send {
    fn apply(&mut self, op: ObjOp) -> Result<ObjResponse, ObjectFault>;
}

pub trait SeqObjectExt {
    fn box_clone(&self) -> Box<dyn SeqObject>;
    fn hash_state(&self, state: &mut dyn Hasher);
}

impl<T> SeqObjectExt for T
where
    T: SeqObject + Clone + Hash + 'static,
{
    fn box_clone(&self) -> Box<dyn SeqObject> {
        Box::new(self.clone())
    }

    fn hash_state(&self, mut state: &mut dyn Hasher) {
        self.hash(&mut state);
    }
}

impl Clone for Box<dyn SeqObject> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Simulated shared memory: 64-bit word cells plus black-box object cells.
#[derive(Debug, Clone, Default)]
pub struct Arena {
    words: Vec<u64>,
    objects: Vec<Box<dyn SeqObject>>,
}

impl Arena {
    /// `word_count` zeroed words followed by the given objects.
    pub fn new(word_count: usize, objects: Vec<Box<dyn SeqObject>>) -> Self {
        Arena { words: vec![0; word_count], objects }
    }

    /// Arena with an explicit initial word image.
    pub fn with_image(words: Vec<u64>, objects: Vec<Box<dyn SeqObject>>) -> Self {
        Arena { words, objects }
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn word(&self, addr: usize) -> Option<u64> {
        self.words.get(addr).copied()
    }

    pub fn object(&self, addr: usize) -> Option<&dyn SeqObject> {
        self.objects.get(addr).map(|o| o.as_ref())
    }

    /// Executes one request atomically.
    pub fn mem_op(&mut self, pid: Pid, request: &Request) -> Result<Outcome, SimError> {
        let len = self.words.len();
        let word = |addr: usize| -> Result<usize, SimError> {
            if addr < len {
                Ok(addr)
            } else {
                Err(SimError::WordOutOfRange { pid, addr, len })
            }
        };
        match *request {
            Request::Read(addr) => Ok(Outcome::Read(self.words[word(addr)?])),
            Request::Write(addr, v) => {
                self.words[word(addr)?] = v;
                Ok(Outcome::Written)
            }
            Request::Cas { addr, expected, new } => {
                let cell = &mut self.words[word(addr)?];
                if *cell == expected {
                    *cell = new;
                    Ok(Outcome::Cas(true))
                } else {
                    Ok(Outcome::Cas(false))
                }
            }
            Request::Apply { obj, op } => {
                let count = self.objects.len();
                let target = self
                    .objects
                    .get_mut(obj)
                    .ok_or(SimError::ObjectOutOfRange { pid, addr: obj, len: count })?;
                target
                    .apply(op)
                    .map(Outcome::Applied)
                    .map_err(|fault| SimError::Object { pid, addr: obj, fault })
            }
        }
    }

    pub(crate) fn into_parts(self) -> (Vec<u64>, Vec<Box<dyn SeqObject>>) {
        (self.words, self.objects)
    }

    pub(crate) fn hash_state(&self, state: &mut dyn Hasher) {
        state.write_usize(self.words.len());
        for w in &self.words {
            state.write_u64(*w);
        }
        for o in &self.objects {
            o.hash_state(state);
        }
    }
}
