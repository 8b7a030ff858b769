use clap::Parser;
use posmap::cli::{execute, AnalysisRequest};

fn main() {
    if let Some(n) = std::env::var("POSMAP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let request = AnalysisRequest::parse();
    std::process::exit(execute(&request));
}
