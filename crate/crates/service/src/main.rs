use std::io::{self, Write};

fn main() {
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let mut out = io::stdout();
    let mut err = io::stderr();
    let code = protogame_service::cli::run(
        std::env::args_os(),
        protogame_service::cli::Io { input: &mut input, out: &mut out, err: &mut err },
    );
    let _ = out.flush();
    std::process::exit(code);
}
