fn main() {
    std::process::exit(gwbrw::experiments_cli::run_main());
}
