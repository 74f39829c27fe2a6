//! Adapter speaking the oracle wire protocol, backed by the built-in stubs.
//! Fault modes let tests exercise every failure path of the bridge.

use clap::{Parser, ValueEnum};
use rsfringe::detector::wire::{Op, Reply, Request, Response};
use rsfringe::detector::{stub_fringe_detect, stub_profile_embed, StubFringeDetector};
use rsfringe::io::load_image;
use std::io::{BufRead, Write};
use std::time::Duration;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Fault {
    None,
    BadId,
    WrongDim,
    Sleep,
    RemoteError,
    Malformed,
    Exit,
}

#[derive(Debug, Parser)]
struct Opts {
    #[arg(long, value_enum, default_value = "none")]
    fault: Fault,
    /// Answer this many requests correctly before the fault kicks in.
    #[arg(long, default_value_t = 0)]
    fault_after: usize,
    #[arg(long, default_value_t = 5000)]
    sleep_ms: u64,
    #[arg(long, default_value_t = 0.4)]
    band_lo: f64,
    #[arg(long, default_value_t = 0.6)]
    band_hi: f64,
    #[arg(long, default_value_t = 0.5)]
    dark: f64,
    #[arg(long, default_value_t = 15)]
    min_run: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
}

fn answer(opts: &Opts, req: &Request) -> Reply {
    let image = match load_image(&req.image_path) {
        Ok(i) => i,
        Err(e) => return Reply::Error(format!("cannot read {}: {e}", req.image_path)),
    };
    let result = match req.op {
        Op::Detect => {
            let det = StubFringeDetector::new((opts.band_lo, opts.band_hi), opts.dark, opts.min_run);
            stub_fringe_detect(&image, det.band_rows(image.rows()), opts.dark, opts.min_run).map(Reply::Label)
        }
        Op::Embed => stub_profile_embed(&image, opts.dim).map(|e| Reply::Vector(e.as_slice().to_vec())),
    };
    result.unwrap_or_else(|e| Reply::Error(e.to_string()))
}

fn main() {
    let opts = Opts::parse();
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    for (n, line) in stdin.lock().lines().enumerate() {
        let Ok(line) = line else { break };
        let req: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                let resp = Response { id: -1, reply: Reply::Error(format!("bad request: {e}")) };
                let _ = stdout.write_all(resp.to_line().as_bytes());
                let _ = stdout.flush();
                continue;
            }
        };
        let mut resp = Response { id: req.id as i64, reply: answer(&opts, &req) };
        let text = if n < opts.fault_after {
            resp.to_line()
        } else {
            match opts.fault {
                Fault::None => resp.to_line(),
                Fault::BadId => {
                    resp.id += 1000;
                    resp.to_line()
                }
                Fault::WrongDim => {
                    if let Reply::Vector(v) = &mut resp.reply {
                        v.push(0.0);
                    }
                    resp.to_line()
                }
                Fault::Sleep => {
                    std::thread::sleep(Duration::from_millis(opts.sleep_ms));
                    resp.to_line()
                }
                Fault::RemoteError => Response { id: resp.id, reply: Reply::Error("model crashed".into()) }.to_line(),
                Fault::Malformed => "this is not json\n".to_string(),
                Fault::Exit => return,
            }
        };
        if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
            break;
        }
    }
}
