fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SURGEFLOW_LOG", "warn")).init();
    std::process::exit(surgeflow::cli::run_cli(std::env::args_os()));
}
