fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(quota_robust::cli::run_to_stdio(&args));
}
