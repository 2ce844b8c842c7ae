use thermoqc_cli::config::OUTPUT_DIR_ENV;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        println!("usage: thermoqc <command> [key=value ...] [--config file]");
        println!("commands: symmetrize qc-check garding simulate weak-strong young localize audit-model replay");
        std::process::exit(if args.is_empty() { 1 } else { 0 });
    }
    std::process::exit(thermoqc_cli::main_with_args(&args, std::env::var(OUTPUT_DIR_ENV).ok()));
}
