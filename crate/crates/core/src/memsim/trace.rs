use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::arena::{Arena, ObjOp, ObjResponse};
use super::program::{Outcome, Pid, Request};

/// One executed shared-memory operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub time: u64,
    pub pid: Pid,
    pub request: Request,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Every processor returned.
    Complete,
    /// The step budget ran out with processors still running.
    NonTermination { budget: u64 },
    /// An exhaustive exploration hit its depth limit on this branch.
    Truncated { depth: u64 },
}

/// Totally ordered record of a run. Times are `1..=events.len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    n: usize,
    pub events: Vec<Event>,
    wake_time: Vec<Option<u64>>,
    return_time: Vec<Option<u64>>,
    return_value: Vec<Option<i64>>,
    pub status: RunStatus,
}

impl Trace {
    pub fn new(n: usize) -> Self {
        Trace {
            n,
            events: Vec::new(),
            wake_time: vec![None; n],
            return_time: vec![None; n],
            return_value: vec![None; n],
            status: RunStatus::Complete,
        }
    }

    /// Number of processors.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.status == RunStatus::Complete
    }

    pub fn wake_time(&self, pid: Pid) -> Option<u64> {
        self.wake_time[pid - 1]
    }

    pub fn return_time(&self, pid: Pid) -> Option<u64> {
        self.return_time[pid - 1]
    }

    pub fn return_value(&self, pid: Pid) -> Option<i64> {
        self.return_value[pid - 1]
    }

    /// `(pid, time, value)` for every processor that returned, by pid.
    pub fn returns(&self) -> impl Iterator<Item = (Pid, u64, i64)> + '_ {
        (1..=self.n).filter_map(move |pid| {
            Some((pid, self.return_time(pid)?, self.return_value(pid)?))
        })
    }

    /// Processors whose first step happened at or before `time`.
    pub fn woken_by(&self, time: u64) -> usize {
        self.wake_time.iter().filter(|w| matches!(w, Some(t) if *t <= time)).count()
    }

    /// Appends an event at the next time slot and marks the wake-up.
    pub(crate) fn push(&mut self, pid: Pid, request: Request, outcome: Outcome) -> u64 {
        let time = self.events.len() as u64 + 1;
        self.events.push(Event { time, pid, request, outcome });
        self.wake_time[pid - 1].get_or_insert(time);
        time
    }

    pub(crate) fn set_return(&mut self, pid: Pid, time: u64, value: i64) {
        self.return_time[pid - 1] = Some(time);
        self.return_value[pid - 1] = Some(value);
    }

    /// Builds a trace from raw parts; used by the parser and the parallel
    /// backend. Checks the time and wake/return invariants.
    pub fn from_parts(
        n: usize,
        events: Vec<Event>,
        returns: Vec<(Pid, u64, i64)>,
        status: RunStatus,
    ) -> Result<Trace, TraceParseError> {
        let mut trace = Trace::new(n);
        trace.status = status;
        for (i, e) in events.into_iter().enumerate() {
            if e.time != i as u64 + 1 {
                return Err(TraceParseError::Invariant(format!(
                    "event {} has time {}, expected {}",
                    i + 1,
                    e.time,
                    i + 1
                )));
            }
            if e.pid == 0 || e.pid > n {
                return Err(TraceParseError::Invariant(format!("pid {} out of 1..={n}", e.pid)));
            }
            trace.push(e.pid, e.request, e.outcome);
        }
        for (pid, time, value) in returns {
            if pid == 0 || pid > n {
                return Err(TraceParseError::Invariant(format!("pid {pid} out of 1..={n}")));
            }
            match trace.wake_time(pid) {
                Some(w) if w <= time => trace.set_return(pid, time, value),
                _ => {
                    return Err(TraceParseError::Invariant(format!(
                        "processor {pid} returns at {time} before waking"
                    )))
                }
            }
        }
        Ok(trace)
    }
}

/// Per-processor and per-kind operation counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkReport {
    pub per_proc: Vec<u64>,
    pub total: u64,
    pub reads: u64,
    pub writes: u64,
    pub cas_attempts: u64,
    pub cas_successes: u64,
    pub object_applies: u64,
}

impl WorkReport {
    pub fn new(n: usize) -> Self {
        WorkReport { per_proc: vec![0; n], ..Default::default() }
    }

    pub fn record(&mut self, pid: Pid, request: &Request, outcome: &Outcome) {
        self.per_proc[pid - 1] += 1;
        self.total += 1;
        match request {
            Request::Read(_) => self.reads += 1,
            Request::Write(..) => self.writes += 1,
            Request::Cas { .. } => {
                self.cas_attempts += 1;
                if *outcome == Outcome::Cas(true) {
                    self.cas_successes += 1;
                }
            }
            Request::Apply { .. } => self.object_applies += 1,
        }
    }

    /// Adds another report's counts (per-processor entries aligned by pid).
    pub fn merge(&mut self, other: &WorkReport) {
        if self.per_proc.len() < other.per_proc.len() {
            self.per_proc.resize(other.per_proc.len(), 0);
        }
        for (mine, theirs) in self.per_proc.iter_mut().zip(&other.per_proc) {
            *mine += theirs;
        }
        self.total += other.total;
        self.reads += other.reads;
        self.writes += other.writes;
        self.cas_attempts += other.cas_attempts;
        self.cas_successes += other.cas_successes;
        self.object_applies += other.object_applies;
    }

    pub fn steps(&self, pid: Pid) -> u64 {
        self.per_proc[pid - 1]
    }

    pub fn per_proc_max(&self) -> u64 {
        self.per_proc.iter().copied().max().unwrap_or(0)
    }

    /// `pid,steps` rows followed by a `total,<sum>` footer.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pid,steps\n");
        for (i, steps) in self.per_proc.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, steps).unwrap();
        }
        writeln!(out, "total,{}", self.total).unwrap();
        out
    }
}

fn encode_event(e: &Event) -> (&'static str, usize, u64, u64, i64) {
    let outcome = |o: &Outcome| -> i64 {
        match o {
            Outcome::Read(v) => *v as i64,
            Outcome::Cas(ok) => *ok as i64,
            Outcome::Applied(r) => r.encode(),
            Outcome::Written | Outcome::Start => 0,
        }
    };
    match &e.request {
        Request::Read(a) => ("read", *a, 0, 0, outcome(&e.outcome)),
        Request::Write(a, v) => ("write", *a, *v, 0, 0),
        Request::Cas { addr, expected, new } => ("cas", *addr, *expected, *new, outcome(&e.outcome)),
        Request::Apply { obj, op } => ("apply", *obj, op.code(), op.arg(), outcome(&e.outcome)),
    }
}

/// Writes the line-oriented trace format:
///
/// ```text
/// # n <processors>
/// # status complete | nontermination <budget> | truncated <depth>
/// <time> <pid> <op> <addr> <arg1> <arg2> <outcome>
/// <time> <pid> ret 0 <value> 0 0
/// ```
///
/// `op` is one of `read`, `write`, `cas`, `apply`. Read outcomes are the
/// value read, CAS outcomes are 1/0, writes are 0. Apply lines carry the
/// object address, operation code and argument; the outcome is the response
/// value, or -1 for an acknowledgment and -2 for an empty removal.
/// A `ret` line follows the event at which its processor returned.
pub fn write_trace<W: Write>(trace: &Trace, mut out: W) -> io::Result<()> {
    writeln!(out, "# n {}", trace.n)?;
    match trace.status {
        RunStatus::Complete => writeln!(out, "# status complete")?,
        RunStatus::NonTermination { budget } => writeln!(out, "# status nontermination {budget}")?,
        RunStatus::Truncated { depth } => writeln!(out, "# status truncated {depth}")?,
    }
    writeln!(out, "# time pid op addr arg1 arg2 outcome")?;
    for e in &trace.events {
        let (op, addr, a1, a2, res) = encode_event(e);
        writeln!(out, "{} {} {} {} {} {} {}", e.time, e.pid, op, addr, a1, a2, res)?;
        if trace.return_time(e.pid) == Some(e.time) {
            let v = trace.return_value(e.pid).unwrap_or_default();
            writeln!(out, "{} {} ret 0 {} 0 0", e.time, e.pid, v)?;
        }
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `# n <processors>` header")]
    MissingHeader,
    #[error("inconsistent trace: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn parse_trace<R: BufRead>(input: R) -> Result<Trace, TraceParseError> {
    let mut n = None;
    let mut status = RunStatus::Complete;
    let mut events = Vec::new();
    let mut returns = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let syntax = |msg: &str| TraceParseError::Syntax { line: lineno, msg: msg.to_string() };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields[0] == "#" {
            match fields.get(1).copied() {
                Some("n") => {
                    let v = fields.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| syntax("bad n"))?;
                    n = Some(v);
                }
                Some("status") => {
                    let arg = || fields.get(3).and_then(|s| s.parse::<u64>().ok());
                    status = match fields.get(2).copied() {
                        Some("complete") => RunStatus::Complete,
                        Some("nontermination") => RunStatus::NonTermination {
                            budget: arg().ok_or_else(|| syntax("bad budget"))?,
                        },
                        Some("truncated") => RunStatus::Truncated {
                            depth: arg().ok_or_else(|| syntax("bad depth"))?,
                        },
                        _ => return Err(syntax("unknown status")),
                    };
                }
                _ => {}
            }
            continue;
        }
        if fields.len() != 7 {
            return Err(syntax("expected 7 fields"));
        }
        let num = |i: usize| fields[i].parse::<u64>().map_err(|_| syntax("expected natural"));
        let signed = |i: usize| fields[i].parse::<i64>().map_err(|_| syntax("expected integer"));
        let time = num(0)?;
        let pid = num(1)? as usize;
        let addr = num(3)? as usize;
        let request = match fields[2] {
            "ret" => {
                returns.push((pid, time, signed(4)?));
                continue;
            }
            "read" => Request::Read(addr),
            "write" => Request::Write(addr, num(4)?),
            "cas" => Request::Cas { addr, expected: num(4)?, new: num(5)? },
            "apply" => Request::Apply {
                obj: addr,
                op: ObjOp::from_code(num(4)?, num(5)?).ok_or_else(|| syntax("unknown object op"))?,
            },
            _ => return Err(syntax("unknown op")),
        };
        let raw = signed(6)?;
        let outcome = match &request {
            Request::Read(_) => Outcome::Read(raw as u64),
            Request::Write(..) => Outcome::Written,
            Request::Cas { .. } => Outcome::Cas(raw != 0),
            Request::Apply { .. } => {
                Outcome::Applied(ObjResponse::decode(raw).ok_or_else(|| syntax("bad response"))?)
            }
        };
        events.push(Event { time, pid, request, outcome });
    }
    let n = n.ok_or(TraceParseError::MissingHeader)?;
    Trace::from_parts(n, events, returns, status)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event at time {time} recorded {recorded:?} but replay produced {replayed}")]
pub struct ReplayMismatch {
    pub time: u64,
    pub recorded: Outcome,
    pub replayed: String,
}

/// Re-executes the trace's requests in order against `arena` (the initial
/// image) and checks that every recorded outcome is reproduced.
pub fn replay(trace: &Trace, mut arena: Arena) -> Result<Arena, ReplayMismatch> {
    for e in &trace.events {
        match arena.mem_op(e.pid, &e.request) {
            Ok(o) if o == e.outcome => {}
            Ok(o) => {
                return Err(ReplayMismatch {
                    time: e.time,
                    recorded: e.outcome.clone(),
                    replayed: format!("{o:?}"),
                })
            }
            Err(err) => {
                return Err(ReplayMismatch {
                    time: e.time,
                    recorded: e.outcome.clone(),
                    replayed: err.to_string(),
                })
            }
        }
    }
    Ok(arena)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trace {
        let mut t = Trace::new(2);
        t.push(1, Request::Cas { addr: 1, expected: 0, new: 1 }, Outcome::Cas(true));
        t.push(2, Request::Read(0), Outcome::Read(7));
        t.push(1, Request::Apply { obj: 0, op: ObjOp::Remove }, Outcome::Applied(ObjResponse::Empty));
        t.set_return(1, 3, 2);
        t.push(2, Request::Write(0, 9), Outcome::Written);
        t.set_return(2, 4, -3);
        t
    }

    #[test]
    fn text_format_round_trips() {
        let t = sample();
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("1 1 cas 1 0 1 1\n"));
        assert!(text.contains("3 1 apply 0 3 0 -2\n3 1 ret 0 2 0 0\n"));
        let parsed = parse_trace(&buf[..]).unwrap();
        assert_eq!(parsed, t);
    }

    #[test]
    fn parser_rejects_gaps_in_time() {
        let text = "# n 1\n1 1 read 0 0 0 0\n3 1 read 0 0 0 0\n";
        assert!(matches!(parse_trace(text.as_bytes()), Err(TraceParseError::Invariant(_))));
    }

    #[test]
    fn parser_requires_header() {
        assert!(matches!(
            parse_trace("1 1 read 0 0 0 0\n".as_bytes()),
            Err(TraceParseError::MissingHeader)
        ));
    }

    #[test]
    fn work_csv_has_total_footer() {
        let mut w = WorkReport::new(2);
        w.record(1, &Request::Read(0), &Outcome::Read(0));
        w.record(2, &Request::Cas { addr: 0, expected: 0, new: 1 }, &Outcome::Cas(true));
        w.record(2, &Request::Write(0, 1), &Outcome::Written);
        assert_eq!(w.to_csv(), "pid,steps\n1,1\n2,2\ntotal,3\n");
        assert_eq!(w.cas_successes, 1);
    }
}
