use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use tungstenite::{Message, WebSocket};

use super::messages::ServerMessage;
use super::service::{ServiceConfig, SessionService};
use crate::error::{Error, Result};

/// Interval between focus updates pushed to the client.
pub const TICK: Duration = Duration::from_millis(50);
const POLL: Duration = Duration::from_millis(10);

/// Serves one session over WebSocket. Clients connect one at a time; the
/// session survives reconnects.
pub struct Server {
    listener: TcpListener,
    service: SessionService,
}

fn ws_error(e: tungstenite::Error) -> Error {
    Error::WebSocket(e.to_string())
}

fn send_all(ws: &mut WebSocket<TcpStream>, msgs: Vec<ServerMessage>) -> Result<()> {
    for m in msgs {
        let text = serde_json::to_string(&m).expect("server frames serialize");
        ws.send(Message::text(text)).map_err(ws_error)?;
    }
    Ok(())
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, config: ServiceConfig) -> Result<Self> {
        Ok(Self {
            service: SessionService::new(config)?,
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn service(&self) -> &SessionService {
        &self.service
    }

    /// Accepts connections until `max_connections` have been served, or
    /// forever when `None`.
    pub fn run(&mut self, max_connections: Option<usize>) -> Result<()> {
        let mut served = 0;
        while max_connections.is_none_or(|m| served < m) {
            let (stream, peer) = self.listener.accept()?;
            served += 1;
            log::info!("client {peer} connected");
            match self.serve(stream) {
                Ok(()) => log::info!("client {peer} left"),
                Err(e) => log::warn!("client {peer}: {e}"),
            }
        }
        Ok(())
    }

    fn serve(&mut self, stream: TcpStream) -> Result<()> {
        let mut ws = tungstenite::accept(stream).map_err(|e| Error::WebSocket(e.to_string()))?;
        ws.get_ref().set_read_timeout(Some(POLL))?;
        send_all(&mut ws, self.service.hello())?;
        let mut last_tick = Instant::now();
        loop {
            match ws.read() {
                Ok(Message::Text(text)) => {
                    let out = self.service.handle(text.as_str());
                    send_all(&mut ws, out)?;
                }
                Ok(Message::Close(_)) => {}
                Ok(_) => {}
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                    return Ok(())
                }
                Err(e) => return Err(ws_error(e)),
            }
            let elapsed = last_tick.elapsed();
            if elapsed >= TICK {
                last_tick = Instant::now();
                let out = self.service.tick(elapsed.as_secs_f64())?;
                send_all(&mut ws, out)?;
            }
        }
    }
}
