use std::collections::BTreeMap;
use std::process::ExitCode;

use msfemlab::cli::{build_config, help_text, read_config_file, run, Command};
use msfemlab::error::Error;

fn parse_args(args: &[String]) -> Result<(Command, BTreeMap<String, String>), Error> {
    if args.is_empty() || args.iter().any(|a| a == "--help" || a == "-h") {
        print!("{}", help_text());
        std::process::exit(0);
    }
    let command = Command::parse(&args[0])?;
    let mut flags = BTreeMap::new();
    let mut i = 1;
    while i < args.len() {
        let arg = &args[i];
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Usage(format!("expected a --key, got '{arg}'")))?;
        if key == "full-scale" || key == "full_scale" {
            flags.insert("full_scale".to_string(), "true".to_string());
            i += 1;
            continue;
        }
        let value = args
            .get(i + 1)
            .ok_or_else(|| Error::Usage(format!("flag --{key} is missing its value")))?;
        flags.insert(key.replace('-', "_"), value.clone());
        i += 2;
    }
    Ok((command, flags))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let result = (|| -> Result<i32, Error> {
        let (command, mut flags) = parse_args(&args)?;
        let file_map = match flags.remove("config") {
            Some(path) => read_config_file(std::path::Path::new(&path))?,
            None => BTreeMap::new(),
        };
        let config = build_config(command, &file_map, &flags)?;
        run(&config)
    })();
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
