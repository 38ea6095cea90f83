use drumloop::cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = cli::init_threads() {
        eprintln!("error: {}", e.message);
        std::process::exit(e.status as i32);
    }
    std::process::exit(cli::run(std::env::args_os()));
}
