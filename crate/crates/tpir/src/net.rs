//! On-disk database format and the TCP protocol that runs the scheme as a
//! real multi-server deployment.
//!
//! DbFile layout: 24-byte header (magic "PIRD", q as 8-byte LE, then M, L,
//! b as 4-byte LE each) followed by M*L*b field elements, 8-byte LE,
//! record-major then row-major then stripe-major. The magic doubles as the
//! format version; an incompatible revision would change it.
//!
//! Wire frames: 4-byte big-endian body length, 1-byte type tag, body. The
//! length counts the bytes after the tag. QUERY carries only the raw query
//! matrix (column count + column-major elements) — no record index, no
//! slot labels — so the server-visible bytes are independent of theta by
//! construction.

use std::io::{self, Read, Write as IoWrite};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::Arc;
use std::thread;

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{FieldMatrix, PrimeField};
use crate::params::SchemeParams;
use crate::scheme::{answer, build_schedule, decode, generate_queries, Database};

const MAGIC: &[u8; 4] = b"PIRD";
pub const PROTOCOL_VERSION: u32 = 1;

const TAG_HELLO: u8 = 0x01;
const TAG_HELLO_ACK: u8 = 0x02;
const TAG_QUERY: u8 = 0x03;
const TAG_ANSWER: u8 = 0x04;
const TAG_ERROR: u8 = 0x7F;

/// Refuse to allocate frames beyond this body size.
const MAX_BODY: u32 = 1 << 28;

pub fn write_db(path: &Path, db: &Database) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let mut buf = vec![];
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&db.field().order().to_le_bytes());
    buf.extend_from_slice(&(db.num_records() as u32).to_le_bytes());
    buf.extend_from_slice(&(db.sub_packetization() as u32).to_le_bytes());
    buf.extend_from_slice(&(db.stripes() as u32).to_le_bytes());
    for rec in db.records() {
        for i in 0..rec.rows() {
            for j in 0..rec.cols() {
                buf.extend_from_slice(&rec[(i, j)].to_le_bytes());
            }
        }
    }
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_db(path: &Path) -> Result<Database> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 24 {
        return Err(Error::Format("file shorter than header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic (unknown format or version)".into()));
    }
    let q = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let m = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let l = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let b = u32::from_le_bytes(bytes[20..24].try_into().unwrap()) as usize;
    let field = PrimeField::new(q)?;
    if m < 2 || l == 0 || b == 0 {
        return Err(Error::InvalidConfig(format!(
            "db header M={m} L={l} b={b}: need M >= 2 and nonzero L, b"
        )));
    }
    let payload = m * l * b;
    if bytes.len() != 24 + 8 * payload {
        return Err(Error::Format(format!(
            "file length {} != {}",
            bytes.len(),
            24 + 8 * payload
        )));
    }
    let mut records = Vec::with_capacity(m);
    let mut off = 24;
    for _ in 0..m {
        let mut entries = Vec::with_capacity(l * b);
        for _ in 0..l * b {
            let e = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            if e >= q {
                return Err(Error::Format(format!("element {e} >= q = {q}")));
            }
            entries.push(e);
            off += 8;
        }
        records.push(FieldMatrix::from_entries(field, l, b, entries)?);
    }
    Database::new(field, records)
}

/// Scheme parameters a client and server must agree on before queries flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionParams {
    pub version: u32,
    pub servers: u32,
    pub collusion: u32,
    pub records: u32,
    pub sub_packetization: u32,
    pub stripes: u32,
    pub q: u64,
}

impl SessionParams {
    pub fn new(params: &SchemeParams, q: u64, stripes: usize) -> Self {
        SessionParams {
            version: PROTOCOL_VERSION,
            servers: params.config.servers as u32,
            collusion: params.config.collusion as u32,
            records: params.config.records as u32,
            sub_packetization: params.sub_packetization as u32,
            stripes: stripes as u32,
            q,
        }
    }

    fn encode(&self, buf: &mut Vec<u8>) {
        buf.extend_from_slice(&self.version.to_le_bytes());
        buf.extend_from_slice(&self.servers.to_le_bytes());
        buf.extend_from_slice(&self.collusion.to_le_bytes());
        buf.extend_from_slice(&self.records.to_le_bytes());
        buf.extend_from_slice(&self.sub_packetization.to_le_bytes());
        buf.extend_from_slice(&self.stripes.to_le_bytes());
        buf.extend_from_slice(&self.q.to_le_bytes());
    }

    fn decode(body: &[u8]) -> Result<Self> {
        if body.len() != 32 {
            return Err(Error::Format("session parameter block must be 32 bytes".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(body[i..i + 4].try_into().unwrap());
        Ok(SessionParams {
            version: u32_at(0),
            servers: u32_at(4),
            collusion: u32_at(8),
            records: u32_at(12),
            sub_packetization: u32_at(16),
            stripes: u32_at(20),
            q: u64::from_le_bytes(body[24..32].try_into().unwrap()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello(SessionParams),
    HelloAck {
        session: SessionParams,
        server_index: u32,
    },
    /// column count, then (M*L)*cols elements column-major
    Query { cols: u32, elements: Vec<u64> },
    /// gamma_j * b elements, slot-major then stripe
    Answer { elements: Vec<u64> },
    Error { message: String },
}

pub fn write_message<W: IoWrite>(w: &mut W, msg: &Message) -> Result<()> {
    let mut body = vec![];
    let tag = match msg {
        Message::Hello(s) => {
            s.encode(&mut body);
            TAG_HELLO
        }
        Message::HelloAck {
            session,
            server_index,
        } => {
            session.encode(&mut body);
            body.extend_from_slice(&server_index.to_le_bytes());
            TAG_HELLO_ACK
        }
        Message::Query { cols, elements } => {
            body.extend_from_slice(&cols.to_le_bytes());
            for e in elements {
                body.extend_from_slice(&e.to_le_bytes());
            }
            TAG_QUERY
        }
        Message::Answer { elements } => {
            for e in elements {
                body.extend_from_slice(&e.to_le_bytes());
            }
            TAG_ANSWER
        }
        Message::Error { message } => {
            body.extend_from_slice(message.as_bytes());
            TAG_ERROR
        }
    };
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(&[tag])?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

pub fn read_message<R: Read>(r: &mut R) -> Result<Message> {
    let mut len_buf = [0u8; 4];
    r.read_exact(&mut len_buf)?;
    let len = u32::from_be_bytes(len_buf);
    if len > MAX_BODY {
        return Err(Error::Format(format!("frame body of {len} bytes refused")));
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    let elements_of = |bytes: &[u8]| -> Result<Vec<u64>> {
        if bytes.len() % 8 != 0 {
            return Err(Error::Format("element payload not 8-byte aligned".into()));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    match tag[0] {
        TAG_HELLO => Ok(Message::Hello(SessionParams::decode(&body)?)),
        TAG_HELLO_ACK => {
            if body.len() != 36 {
                return Err(Error::Format("HELLO_ACK body must be 36 bytes".into()));
            }
            Ok(Message::HelloAck {
                session: SessionParams::decode(&body[..32])?,
                server_index: u32::from_le_bytes(body[32..36].try_into().unwrap()),
            })
        }
        TAG_QUERY => {
            if body.len() < 4 {
                return Err(Error::Format("QUERY body too short".into()));
            }
            Ok(Message::Query {
                cols: u32::from_le_bytes(body[..4].try_into().unwrap()),
                elements: elements_of(&body[4..])?,
            })
        }
        TAG_ANSWER => Ok(Message::Answer {
            elements: elements_of(&body)?,
        }),
        TAG_ERROR => Ok(Message::Error {
            message: String::from_utf8_lossy(&body).into_owned(),
        }),
        t => Err(Error::Format(format!("unknown message tag {t:#04x}"))),
    }
}

/// A bound, not-yet-running server instance.
pub struct Server {
    listener: TcpListener,
    db: Arc<Database>,
    params: SchemeParams,
    index: usize,
}

impl Server {
    pub fn bind(db: Database, params: SchemeParams, listen: &str, index: usize) -> Result<Self> {
        if index >= params.config.servers {
            return Err(Error::InvalidConfig(format!(
                "server index {index} out of range for N = {}",
                params.config.servers
            )));
        }
        if db.num_records() != params.config.records
            || db.sub_packetization() != params.sub_packetization
        {
            return Err(Error::InvalidConfig(
                "database shape does not match scheme parameters".into(),
            ));
        }
        let listener = TcpListener::bind(listen)?;
        Ok(Server {
            listener,
            db: Arc::new(db),
            params,
            index,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accept connections forever, one thread per connection.
    pub fn run(self) -> Result<()> {
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(_) => continue,
            };
            let db = Arc::clone(&self.db);
            let params = self.params.clone();
            let index = self.index;
            thread::spawn(move || {
                let _ = handle_connection(stream, &db, &params, index);
            });
        }
        Ok(())
    }

    /// Run the accept loop on a background thread (used by tests and the
    /// CLI's loopback demo mode).
    pub fn spawn(self) -> Result<SocketAddr> {
        let addr = self.local_addr()?;
        thread::spawn(move || {
            let _ = self.run();
        });
        Ok(addr)
    }
}

fn send_error(stream: &mut TcpStream, message: &str) {
    let _ = write_message(
        stream,
        &Message::Error {
            message: message.into(),
        },
    );
}

/// HELLO handshake, then QUERY -> ANSWER until the peer hangs up. The
/// answer path is a single oblivious matrix product; nothing here takes or
/// infers a record index.
fn handle_connection(
    mut stream: TcpStream,
    db: &Database,
    params: &SchemeParams,
    index: usize,
) -> Result<()> {
    let expected = SessionParams::new(params, db.field().order(), db.stripes());
    match read_message(&mut stream)? {
        Message::Hello(got) if got == expected => {
            write_message(
                &mut stream,
                &Message::HelloAck {
                    session: expected,
                    server_index: index as u32,
                },
            )?;
        }
        Message::Hello(got) => {
            send_error(
                &mut stream,
                &format!("parameter mismatch: got {got:?}, serving {expected:?}"),
            );
            return Ok(());
        }
        _ => {
            send_error(&mut stream, "expected HELLO");
            return Ok(());
        }
    }
    let ml = db.num_records() * db.sub_packetization();
    let gamma = params.gamma(index);
    loop {
        let msg = match read_message(&mut stream) {
            Ok(m) => m,
            Err(Error::Io(e)) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => {
                send_error(&mut stream, &format!("malformed frame: {e}"));
                return Ok(());
            }
        };
        let (cols, elements) = match msg {
            Message::Query { cols, elements } => (cols as usize, elements),
            _ => {
                send_error(&mut stream, "expected QUERY");
                return Ok(());
            }
        };
        if cols != gamma || elements.len() != ml * cols {
            send_error(
                &mut stream,
                &format!("query shape: want {ml} x {gamma} column-major"),
            );
            return Ok(());
        }
        // column-major on the wire -> row-major matrix
        let mut entries = vec![0u64; ml * cols];
        for (idx, &e) in elements.iter().enumerate() {
            let (c, r) = (idx / ml, idx % ml);
            entries[r * cols + c] = e;
        }
        let matrix = match FieldMatrix::from_entries(db.field(), ml, cols, entries) {
            Ok(m) => m,
            Err(e) => {
                send_error(&mut stream, &format!("bad query element: {e}"));
                return Ok(());
            }
        };
        let ans = answer(db, &matrix)?;
        let mut out = Vec::with_capacity(ans.rows() * ans.cols());
        for i in 0..ans.rows() {
            for j in 0..ans.cols() {
                out.push(ans[(i, j)]);
            }
        }
        write_message(&mut stream, &Message::Answer { elements: out })?;
    }
}

/// What a networked retrieval returned, plus the measured download.
#[derive(Debug)]
pub struct RetrievalOutcome {
    pub record: FieldMatrix,
    /// field elements received in ANSWER bodies; always D * b
    pub downloaded_symbols: usize,
}

fn exchange_with_server(
    address: &str,
    session: SessionParams,
    j: usize,
    query: &FieldMatrix,
) -> Result<Vec<u64>> {
    let mut stream = TcpStream::connect(address)
        .map_err(|e| Error::RetrievalFailed(format!("server {j} at {address}: {e}")))?;
    write_message(&mut stream, &Message::Hello(session))?;
    match read_message(&mut stream)? {
        Message::HelloAck {
            session: got,
            server_index,
        } => {
            if got != session || server_index as usize != j {
                return Err(Error::RetrievalFailed(format!(
                    "server {j}: inconsistent HELLO_ACK"
                )));
            }
        }
        Message::Error { message } => {
            return Err(Error::RetrievalFailed(format!("server {j}: {message}")));
        }
        _ => return Err(Error::RetrievalFailed(format!("server {j}: bad handshake"))),
    }
    let (rows, cols) = (query.rows(), query.cols());
    let mut elements = Vec::with_capacity(rows * cols);
    for c in 0..cols {
        for r in 0..rows {
            elements.push(query[(r, c)]);
        }
    }
    write_message(
        &mut stream,
        &Message::Query {
            cols: cols as u32,
            elements,
        },
    )?;
    match read_message(&mut stream)? {
        Message::Answer { elements } => Ok(elements),
        Message::Error { message } => {
            Err(Error::RetrievalFailed(format!("server {j}: {message}")))
        }
        _ => Err(Error::RetrievalFailed(format!("server {j}: expected ANSWER"))),
    }
}

/// Retrieve record `theta` from N live servers. Queries are generated
/// once, dispatched concurrently, and the record is decoded only after all
/// N answers arrive — there is no partial recovery.
pub fn client_retrieve<R: Rng>(
    addresses: &[String],
    params: &SchemeParams,
    q: u64,
    stripes: usize,
    theta: usize,
    rng: &mut R,
) -> Result<RetrievalOutcome> {
    let n = params.config.servers;
    if addresses.len() != n {
        return Err(Error::InvalidConfig(format!(
            "need {n} server addresses, got {}",
            addresses.len()
        )));
    }
    let field = PrimeField::new(q)?;
    params.check_field(q)?;
    let schedule = build_schedule(params)?;
    let query_set = generate_queries(&schedule, field, theta, rng)?;
    let session = SessionParams::new(params, q, stripes);

    let results: Vec<Result<Vec<u64>>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..n)
            .map(|j| {
                let addr = &addresses[j];
                let query = &query_set.matrices[j];
                scope.spawn(move || exchange_with_server(addr, session, j, query))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut answers = Vec::with_capacity(n);
    let mut downloaded = 0;
    for (j, res) in results.into_iter().enumerate() {
        let elements = res.map_err(|e| match e {
            Error::RetrievalFailed(_) => e,
            other => Error::RetrievalFailed(format!("server {j}: {other}")),
        })?;
        let gamma = params.gamma(j);
        if elements.len() != gamma * stripes {
            return Err(Error::RetrievalFailed(format!(
                "server {j}: answer has {} symbols, want {}",
                elements.len(),
                gamma * stripes
            )));
        }
        downloaded += elements.len();
        answers.push(FieldMatrix::from_entries(field, gamma, stripes, elements)?);
    }
    let record = decode(&schedule, field, &query_set.mix, &answers)?;
    Ok(RetrievalOutcome {
        record,
        downloaded_symbols: downloaded,
    })
}
