fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(qspring::cli::parse_and_dispatch(&args));
}
