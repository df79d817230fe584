//! Adapter process serving the in-process mock libraries over the
//! line-delimited JSON protocol on stdin/stdout.

use std::io::{stdin, stdout, BufWriter};
use std::time::Duration;

use apimorph::runtime::external::serve;
use apimorph::runtime::MockRuntime;
use clap::Parser;

#[derive(Parser)]
#[command(about = "Serve the mock libraries over stdin/stdout")]
struct Args {
    /// Sleep before every eval reply, for exercising timeouts.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
}

fn main() {
    let args = Args::parse();
    let out = BufWriter::new(stdout().lock());
    if let Err(e) = serve(&MockRuntime, stdin().lock(), out, Duration::from_millis(args.delay_ms)) {
        eprintln!("mock-adapter: {e}");
        std::process::exit(1);
    }
}
