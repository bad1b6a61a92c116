fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KINEMA_LOG", "warn")).init();
    std::process::exit(kinema_cli::run(std::env::args_os()));
}
