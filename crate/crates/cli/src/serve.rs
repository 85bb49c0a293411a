//! Live collaborative session behind a WebSocket bridge.
//!
//! Every bus envelope goes out as one JSON text frame. A client that joins
//! first gets the retained `/map`, `/goal` and `/mode` values. Inbound
//! frames are accepted on `/cmd_vel_human` and `/goal` only; anything else
//! is answered with an `{"error": ...}` frame and dropped.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use c3a_core::bus::{decode_client_frame, encode_frame, Envelope, Payload, Topic};
use c3a_core::cognitive::make_priority_config;
use c3a_core::harness::{RunMode, Session, SessionConfig, Subject};
use c3a_core::memory::MemoryStore;
use c3a_core::world::GridWorld;
use c3a_core::VelocityCommand;
use tungstenite::{Message, WebSocket};

const POLL: Duration = Duration::from_millis(5);
const LATCHED: [Topic; 3] = [Topic::Map, Topic::Goal, Topic::Mode];

pub struct ServeOptions {
    pub seed: u64,
    /// A joystick command keeps driving for this long (sim seconds) after
    /// it arrives, so clients sending slower than the tick rate do not
    /// stutter.
    pub hold: f64,
    /// Stop after this much sim time; run forever when `None`.
    pub duration: Option<f64>,
    pub memory: MemoryStore,
}

enum Event {
    Join(u64, Sender<String>),
    Frame(Envelope),
    Leave(u64),
}

fn error_frame(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

fn client(stream: TcpStream, id: u64, events: Sender<Event>) {
    let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("handshake with {peer} failed: {e}");
            return;
        }
    };
    if let Err(e) = ws.get_ref().set_read_timeout(Some(POLL)) {
        log::warn!("{peer}: {e}");
        return;
    }
    let (tx, rx) = mpsc::channel();
    if events.send(Event::Join(id, tx)).is_err() {
        return;
    }
    log::info!("client {id} connected from {peer}");
    pump(&mut ws, &rx, &events);
    let _ = ws.close(None);
    let _ = ws.flush();
    let _ = events.send(Event::Leave(id));
    log::info!("client {id} left");
}

fn pump(ws: &mut WebSocket<TcpStream>, outbound: &Receiver<String>, events: &Sender<Event>) {
    loop {
        loop {
            match outbound.try_recv() {
                Ok(frame) => {
                    if ws.send(Message::text(frame)).is_err() {
                        return;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return,
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => match decode_client_frame(text.as_str()) {
                Ok(env) => {
                    if events.send(Event::Frame(env)).is_err() {
                        return;
                    }
                }
                Err(e) => {
                    if ws.send(Message::text(error_frame(&e.to_string()))).is_err() {
                        return;
                    }
                }
            },
            Ok(Message::Close(_)) => return,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => return,
        }
    }
}

fn accept_loop(listener: TcpListener, events: Sender<Event>) {
    for (id, stream) in listener.incoming().enumerate() {
        match stream {
            Ok(s) => {
                let events = events.clone();
                thread::spawn(move || client(s, id as u64, events));
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
}

/// Runs the session in real time until `duration` elapses.
pub fn serve(listener: TcpListener, world: GridWorld, subject: &Subject, opts: ServeOptions) -> Result<()> {
    let priority = make_priority_config(&subject.profile);
    let config = SessionConfig::new(RunMode::Collaborative, priority, opts.seed);
    let dt = config.dt;
    let mut session = Session::new(world, config, opts.memory);
    let tap = session.bus().subscribe_all();
    tap.drain();

    let (events_tx, events) = mpsc::channel();
    thread::spawn(move || accept_loop(listener, events_tx));

    let mut clients: BTreeMap<u64, Sender<String>> = BTreeMap::new();
    let mut held: Option<(VelocityCommand, f64)> = None;
    let started = Instant::now();
    let mut ticks: u64 = 0;
    loop {
        let now = session.now();
        for event in events.try_iter() {
            match event {
                Event::Join(id, tx) => {
                    for topic in LATCHED {
                        if let Some(env) = session.bus().latched(topic) {
                            let _ = tx.send(encode_frame(env));
                        }
                    }
                    clients.insert(id, tx);
                }
                Event::Leave(id) => {
                    clients.remove(&id);
                }
                Event::Frame(env) => match env.payload {
                    Payload::VelocityCommand(cmd) => held = Some((cmd, now)),
                    Payload::GoalPose(goal) => {
                        session
                            .bus()
                            .publish(Topic::Goal, now, Payload::GoalPose(goal))
                            .context("publishing a client goal")?;
                    }
                    other => log::warn!("ignoring client payload {:?}", other.kind()),
                },
            }
        }
        if let Some((cmd, at)) = held {
            if now - at <= opts.hold + 1e-9 {
                session
                    .bus()
                    .publish(Topic::CmdVelHuman, now, Payload::VelocityCommand(cmd))
                    .context("publishing a client command")?;
            } else {
                held = None;
            }
        }

        let report = session.step()?;
        if report.reached {
            log::info!("goal reached at t={:.2}", report.now);
        }
        for env in tap.drain() {
            let frame = encode_frame(&env);
            clients.retain(|_, tx| tx.send(frame.clone()).is_ok());
        }

        ticks += 1;
        if opts.duration.is_some_and(|d| session.now() >= d - 1e-9) {
            break;
        }
        let due = started + Duration::from_secs_f64(ticks as f64 * dt);
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            thread::sleep(wait);
        }
    }
    session.finish()?;
    Ok(())
}
