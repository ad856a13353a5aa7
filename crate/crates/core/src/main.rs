fn main() {
    std::process::exit(pnc::cli::dispatch(std::env::args_os()));
}
