use std::io::{ErrorKind, Read};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::{ingest_record, IngestError, IngestRecord, IngestReport};
use crate::catalog::{BusinessMeta, SourceKind};
use crate::lake::Lake;
use crate::security::Ticket;

/// Largest accepted frame, excluding the newline.
pub const MAX_FRAME_BYTES: usize = 1024 * 1024;
const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone)]
pub struct StreamOptions {
    pub max_records: usize,
    /// Stop once this many connections have been accepted and all of them
    /// have closed. `None` keeps accepting until `max_records` is reached.
    pub max_connections: Option<usize>,
    pub source_name: String,
    pub business: BusinessMeta,
}

impl StreamOptions {
    pub fn new(max_records: usize) -> Self {
        Self {
            max_records,
            max_connections: None,
            source_name: "stream".into(),
            business: BusinessMeta::default(),
        }
    }
}

/// TCP listener taking newline-delimited UTF-8 frames, one record per frame.
#[derive(Debug)]
pub struct StreamListener {
    listener: TcpListener,
}

impl StreamListener {
    pub fn bind(addr: &str) -> Result<Self, IngestError> {
        let listener = TcpListener::bind(addr).map_err(|source| IngestError::BindFailure {
            addr: addr.to_owned(),
            source,
        })?;
        Ok(Self { listener })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serve connections until a stop condition in `opts` is met.
    pub fn run(
        self,
        lake: &Lake,
        opts: &StreamOptions,
        ticket: &Ticket,
    ) -> Result<IngestReport, IngestError> {
        self.listener
            .set_nonblocking(true)
            .map_err(IngestError::Stream)?;
        let shared = Shared {
            lake,
            opts,
            ticket,
            reserved: AtomicUsize::new(0),
            stop: AtomicBool::new(opts.max_records == 0),
            report: Mutex::new(IngestReport::default()),
            error: Mutex::new(None),
        };

        thread::scope(|scope| {
            let mut accepted = 0usize;
            let mut workers = Vec::new();
            while !shared.stop.load(Ordering::SeqCst) {
                if opts.max_connections.is_some_and(|m| accepted >= m) {
                    break;
                }
                match self.listener.accept() {
                    Ok((conn, _)) => {
                        accepted += 1;
                        let shared = &shared;
                        workers.push(scope.spawn(move || shared.serve(conn)));
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
                    Err(e) => {
                        shared.fail(IngestError::Stream(e));
                    }
                }
            }
            for w in workers {
                let _ = w.join();
            }
        });

        if let Some(err) = shared.error.into_inner().expect("error lock") {
            return Err(err);
        }
        let mut report = shared.report.into_inner().expect("report lock");
        report.entries.sort_by_key(|e| (e.ml_time, e.da_time));
        Ok(report)
    }
}

struct Shared<'a> {
    lake: &'a Lake,
    opts: &'a StreamOptions,
    ticket: &'a Ticket,
    reserved: AtomicUsize,
    stop: AtomicBool,
    report: Mutex<IngestReport>,
    error: Mutex<Option<IngestError>>,
}

impl Shared<'_> {
    fn fail(&self, err: IngestError) {
        self.stop.store(true, Ordering::SeqCst);
        self.error.lock().expect("error lock").get_or_insert(err);
    }

    fn reject_frame(&self) {
        self.report.lock().expect("report lock").rejected_frames += 1;
    }

    fn serve(&self, mut conn: TcpStream) {
        if conn.set_nonblocking(false).is_err() || conn.set_read_timeout(Some(POLL)).is_err() {
            return;
        }
        let mut pending: Vec<u8> = Vec::new();
        let mut oversized = false;
        let mut chunk = vec![0u8; 64 * 1024];
        while !self.stop.load(Ordering::SeqCst) {
            let n = match conn.read(&mut chunk) {
                // Closed: an unterminated trailing frame is discarded.
                Ok(0) => return,
                Ok(n) => n,
                Err(e)
                    if matches!(
                        e.kind(),
                        ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted
                    ) =>
                {
                    continue
                }
                Err(_) => return,
            };
            let mut data = &chunk[..n];
            while let Some(pos) = data.iter().position(|&b| b == b'\n') {
                let (head, rest) = data.split_at(pos);
                data = &rest[1..];
                if oversized || pending.len() + head.len() > MAX_FRAME_BYTES {
                    oversized = false;
                    pending.clear();
                    self.reject_frame();
                    continue;
                }
                pending.extend_from_slice(head);
                let frame = std::mem::take(&mut pending);
                if !self.accept_frame(frame) {
                    return;
                }
            }
            if oversized || pending.len() + data.len() > MAX_FRAME_BYTES {
                oversized = true;
                pending.clear();
            } else {
                pending.extend_from_slice(data);
            }
        }
    }

    /// Returns false once the listener should stop.
    fn accept_frame(&self, mut frame: Vec<u8>) -> bool {
        if frame.last() == Some(&b'\r') {
            frame.pop();
        }
        if frame.is_empty() || std::str::from_utf8(&frame).is_err() {
            self.reject_frame();
            return true;
        }
        let da_time = self.lake.clock().now_millis();
        let slot = self
            .reserved
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |r| {
                (r < self.opts.max_records).then_some(r + 1)
            });
        if slot.is_err() {
            self.stop.store(true, Ordering::SeqCst);
            return false;
        }
        let record = IngestRecord::new(frame, SourceKind::Stream, &self.opts.source_name, da_time);
        match ingest_record(self.lake, record, &self.opts.business, self.ticket) {
            Ok(entry) => {
                self.report.lock().expect("report lock").entries.push(entry);
                if slot == Ok(self.opts.max_records - 1) {
                    self.stop.store(true, Ordering::SeqCst);
                }
                true
            }
            Err(e) => {
                self.fail(e);
                false
            }
        }
    }
}

/// Bind `endpoint` and ingest up to `max_records` frames.
pub fn ingest_stream(
    lake: &Lake,
    endpoint: &str,
    max_records: usize,
    ticket: &Ticket,
) -> Result<IngestReport, IngestError> {
    StreamListener::bind(endpoint)?.run(lake, &StreamOptions::new(max_records), ticket)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::testutil::*;
    use std::collections::HashSet;
    use std::io::Write;

    fn send(addr: SocketAddr, bytes: Vec<u8>) -> thread::JoinHandle<()> {
        thread::spawn(move || {
            let mut s = TcpStream::connect(addr).unwrap();
            s.write_all(&bytes).unwrap();
        })
    }

    #[test]
    fn five_frames_five_records() {
        let lake = metered_lake();
        let t = writer(&lake);
        let listener = StreamListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let frames: String = (0..5).map(|i| format!("lab result {i}\n")).collect();
        let client = send(addr, frames.into_bytes());
        let report = listener.run(&lake, &StreamOptions::new(5), &t).unwrap();
        client.join().unwrap();
        assert_eq!(report.count(), 5);
        assert_eq!(
            &*lake.get_blob(report.entries[0].id, &t).unwrap(),
            b"lab result 0"
        );
    }

    #[test]
    fn partial_frame_on_close_is_dropped() {
        let lake = metered_lake();
        let t = writer(&lake);
        let listener = StreamListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let client = send(addr, b"one\ntwo\nthree-without-newl".to_vec());
        let opts = StreamOptions {
            max_connections: Some(1),
            ..StreamOptions::new(10)
        };
        let report = listener.run(&lake, &opts, &t).unwrap();
        client.join().unwrap();
        assert_eq!(report.count(), 2);
        assert_eq!(lake.store().len(), 2);
    }

    #[test]
    fn concurrent_connections_do_not_collide() {
        let lake = metered_lake();
        let t = writer(&lake);
        let listener = StreamListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let clients: Vec<_> = (0..2)
            .map(|c| {
                send(
                    addr,
                    (0..10)
                        .map(|i| format!("{c}:{i}\n"))
                        .collect::<String>()
                        .into_bytes(),
                )
            })
            .collect();
        let report = listener.run(&lake, &StreamOptions::new(20), &t).unwrap();
        for c in clients {
            c.join().unwrap();
        }
        let ids: HashSet<_> = report.entries.iter().map(|e| e.id).collect();
        assert_eq!(ids.len(), 20);
        assert_eq!(lake.store().len(), 20);
    }

    #[test]
    fn bad_frames_are_skipped() {
        let lake = metered_lake();
        let t = writer(&lake);
        let listener = StreamListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let mut bytes = vec![b'x'; MAX_FRAME_BYTES + 10];
        bytes.extend_from_slice(b"\n\xff\xfe\n\nok\n");
        let client = send(addr, bytes);
        let opts = StreamOptions {
            max_connections: Some(1),
            ..StreamOptions::new(10)
        };
        let report = listener.run(&lake, &opts, &t).unwrap();
        client.join().unwrap();
        assert_eq!(report.count(), 1);
        assert_eq!(report.rejected_frames, 3);
    }

    #[test]
    fn bind_failure_is_reported() {
        let taken = StreamListener::bind("127.0.0.1:0").unwrap();
        let addr = taken.local_addr().unwrap().to_string();
        assert!(matches!(
            StreamListener::bind(&addr),
            Err(IngestError::BindFailure { .. })
        ));
    }
}
