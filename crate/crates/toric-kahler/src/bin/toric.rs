use clap::Parser;

fn main() {
    // die quietly when a downstream pipe closes (e.g. `toric ... | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = toric_kahler::cli::Cli::parse();
    std::process::exit(toric_kahler::cli::dispatch(cli));
}
