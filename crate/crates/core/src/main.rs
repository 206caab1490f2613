fn main() {
    std::process::exit(uav_iab::cli::run(std::env::args_os()));
}
