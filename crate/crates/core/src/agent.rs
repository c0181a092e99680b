//! Distributed FLISR edge agents.
//!
//! An agent runs next to one pole. It knows only the properties of its own
//! switch and the indications that switch reports; it applies the same three
//! rules as the centralized planner and answers with a control message for
//! its own breaker. Agents never talk to each other.
//!
//! Agents are reached over a local ordered stream. The framing is one JSON
//! document per line: the first line carries the [`PoleProperties`], every
//! following line is a point message. The agent writes one line per control
//! message it emits.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::{evaluate_rules, ControlAction, SwitchObservation};
use crate::protocol::{self, make_control, Meaning, PointMessage};
use crate::topology::{SwitchAsset, SwitchKind};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("message for ASDU {got} delivered to agent of ASDU {expected}")]
    AsduMismatch { expected: u32, got: u32 },
    #[error("agent task has stopped")]
    Stopped,
    #[error("bad frame: {0}")]
    Frame(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Local properties of the pole an agent is installed on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoleProperties {
    pub scada_id: String,
    pub asdu: u32,
    pub kind: SwitchKind,
    pub normally_open: bool,
    pub customers: u32,
}

impl From<&SwitchAsset> for PoleProperties {
    fn from(s: &SwitchAsset) -> Self {
        Self {
            scada_id: s.scada_id.clone(),
            asdu: s.asdu,
            kind: s.kind,
            normally_open: s.normally_open,
            customers: s.customers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub properties: PoleProperties,
    pub observation: SwitchObservation,
    pub last_command: Option<ControlAction>,
}

impl AgentState {
    pub fn new(properties: PoleProperties) -> Self {
        let observation = SwitchObservation::new(properties.scada_id.clone(), false, false);
        Self {
            properties,
            observation,
            last_command: None,
        }
    }

    /// Fold a status message into the local observation.
    pub fn ingest(&mut self, message: &PointMessage) -> Result<(), AgentError> {
        if message.asdu_ca != self.properties.asdu {
            return Err(AgentError::AsduMismatch {
                expected: self.properties.asdu,
                got: message.asdu_ca,
            });
        }
        let indication = protocol::interpret(message, self.properties.kind);
        match indication.meaning {
            Meaning::Fpi => self.observation.fpi = indication.asserted,
            Meaning::Lvi => self.observation.lvi = indication.asserted,
            Meaning::Control | Meaning::Unknown => {}
        }
        Ok(())
    }

    /// Evaluate the rules; emits only when the resulting command differs
    /// from the last one sent.
    pub fn decide(&mut self) -> Option<(ControlAction, PointMessage)> {
        let action = evaluate_rules(&self.observation, self.properties.normally_open)?;
        if self.last_command.as_ref() == Some(&action) {
            return None;
        }
        let wire = make_control(
            self.properties.kind,
            self.properties.asdu,
            action.verb.breaker_action(),
        );
        self.last_command = Some(action.clone());
        Some((action, wire))
    }

    /// `ingest` followed by `decide`.
    pub fn handle(&mut self, message: &PointMessage) -> Result<Option<PointMessage>, AgentError> {
        self.ingest(message)?;
        Ok(self.decide().map(|(_, wire)| wire))
    }
}

/// An agent confined to its own thread, driven over channels. Every input
/// message gets exactly one reply: the control message emitted, if any.
pub struct AgentTask {
    scada_id: String,
    tx: mpsc::Sender<PointMessage>,
    rx: mpsc::Receiver<Result<Option<PointMessage>, AgentError>>,
    handle: Option<thread::JoinHandle<AgentState>>,
}

impl AgentTask {
    pub fn spawn(properties: PoleProperties) -> Self {
        let (tx, inbox) = mpsc::channel::<PointMessage>();
        let (outbox, rx) = mpsc::channel();
        let scada_id = properties.scada_id.clone();
        let handle = thread::Builder::new()
            .name(format!("agent-{scada_id}"))
            .spawn(move || {
                let mut state = AgentState::new(properties);
                for message in inbox {
                    if outbox.send(state.handle(&message)).is_err() {
                        break;
                    }
                }
                state
            })
            .expect("spawn agent thread");
        Self {
            scada_id,
            tx,
            rx,
            handle: Some(handle),
        }
    }

    pub fn scada_id(&self) -> &str {
        &self.scada_id
    }

    pub fn deliver(&self, message: PointMessage) -> Result<Option<PointMessage>, AgentError> {
        self.tx.send(message).map_err(|_| AgentError::Stopped)?;
        self.rx.recv().map_err(|_| AgentError::Stopped)?
    }

    /// Stop the task and return its final state.
    pub fn finish(mut self) -> Result<AgentState, AgentError> {
        let handle = self.handle.take().expect("handle present until finish");
        drop(self);
        handle.join().map_err(|_| AgentError::Stopped)
    }
}

impl Drop for AgentTask {
    fn drop(&mut self) {
        // Closing the inbox ends the loop; the thread is detached if not joined.
        let (dead_tx, _) = mpsc::channel();
        self.tx = dead_tx;
    }
}

// ---------------------------------------------------------------------------
// Newline-delimited stream framing
// ---------------------------------------------------------------------------

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    w.flush()
}

pub fn write_properties<W: Write>(w: &mut W, properties: &PoleProperties) -> io::Result<()> {
    write_line(w, properties)
}

pub fn write_message<W: Write>(w: &mut W, message: &PointMessage) -> io::Result<()> {
    write_line(w, message)
}

/// Serve one agent connection: read the properties line, then answer every
/// status line. Returns the agent state when the peer closes its side.
pub fn serve_connection<R: BufRead, W: Write>(reader: R, mut writer: W) -> Result<AgentState, AgentError> {
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| AgentError::Frame("connection closed before pole properties".into()))??;
    let properties: PoleProperties =
        serde_json::from_str(&first).map_err(|e| AgentError::Frame(e.to_string()))?;
    let mut state = AgentState::new(properties);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let message = protocol::decode_str(&line).map_err(|e| AgentError::Frame(e.to_string()))?;
        if let Some(control) = state.handle(&message)? {
            write_message(&mut writer, &control)?;
        }
    }
    Ok(state)
}

/// An agent listening on a loopback TCP port for a single connection.
pub struct LoopbackAgent {
    port: u16,
    handle: thread::JoinHandle<Result<AgentState, AgentError>>,
}

impl LoopbackAgent {
    pub fn spawn() -> io::Result<Self> {
        let listener = TcpListener::bind(("127.0.0.1", 0))?;
        let port = listener.local_addr()?.port();
        let handle = thread::spawn(move || {
            let (stream, _) = listener.accept()?;
            let reader = BufReader::new(stream.try_clone()?);
            serve_connection(reader, stream)
        });
        Ok(Self { port, handle })
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn join(self) -> Result<AgentState, AgentError> {
        self.handle.join().map_err(|_| AgentError::Stopped)?
    }
}

/// Client side of a loopback agent session.
pub struct LoopbackLink {
    stream: TcpStream,
}

impl LoopbackLink {
    pub fn connect(port: u16, properties: &PoleProperties) -> io::Result<Self> {
        let mut stream = TcpStream::connect(("127.0.0.1", port))?;
        stream.set_nodelay(true)?;
        write_properties(&mut stream, properties)?;
        Ok(Self { stream })
    }

    pub fn send(&mut self, message: &PointMessage) -> io::Result<()> {
        write_message(&mut self.stream, message)
    }

    /// Close the sending side and collect every control message the agent
    /// wrote.
    pub fn finish(self) -> Result<Vec<PointMessage>, AgentError> {
        self.stream.shutdown(Shutdown::Write)?;
        BufReader::new(self.stream)
            .lines()
            .map(|line| {
                protocol::decode_str(&line?).map_err(|e| AgentError::Frame(e.to_string()))
            })
            .collect()
    }
}

/// Run a whole message sequence through a fresh loopback agent.
pub fn loopback_session(
    properties: &PoleProperties,
    messages: &[PointMessage],
) -> Result<Vec<PointMessage>, AgentError> {
    let agent = LoopbackAgent::spawn()?;
    let mut link = LoopbackLink::connect(agent.port(), properties)?;
    for m in messages {
        link.send(m)?;
    }
    let controls = link.finish()?;
    agent.join()?;
    Ok(controls)
}
