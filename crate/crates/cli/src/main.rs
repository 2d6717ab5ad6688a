fn main() {
    std::process::exit(twisted_rfh_cli::run(std::env::args_os()));
}
