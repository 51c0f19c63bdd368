//! Stand-in solver for tests and demos.
//!
//! Usage: `benchfold-stub <script>`. The script is read line by line; each
//! line is one directive:
//!
//! ```text
//! print <text>               line to stdout
//! eprint <text>              line to stderr
//! sleep <seconds>
//! alloc <MB>                 allocate and touch memory, kept until exit
//! spawn-child <secs> <file>  start `sleep <secs>` in the background, write its pid to <file>
//! append <file> <text>       append a line to <file>
//! exit <code>
//! ```
//!
//! Blank lines and `#` comments are skipped. Anything else exits 64.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::process::{self, Command};
use std::thread;
use std::time::Duration;

fn main() {
    let Some(script) = std::env::args().nth(1) else {
        eprintln!("usage: benchfold-stub <script>");
        process::exit(64);
    };
    let text = match fs::read_to_string(&script) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("benchfold-stub: {script}: {e}");
            process::exit(66);
        }
    };
    let mut held: Vec<Vec<u8>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (op, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        if let Err(msg) = step(op, rest, &mut held) {
            eprintln!("benchfold-stub: line {}: {msg}", n + 1);
            process::exit(64);
        }
    }
    drop(held);
}

fn step(op: &str, rest: &str, held: &mut Vec<Vec<u8>>) -> Result<(), String> {
    let number = |s: &str| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"));
    match op {
        "print" => println!("{rest}"),
        "eprint" => eprintln!("{rest}"),
        "sleep" => thread::sleep(Duration::from_secs_f64(number(rest)?.max(0.0))),
        "alloc" => {
            let mb = number(rest)?;
            let mut block = vec![0u8; (mb * 1024.0 * 1024.0) as usize];
            // Write every page so it becomes resident.
            for i in (0..block.len()).step_by(4096) {
                block[i] = 1;
            }
            held.push(std::hint::black_box(block));
        }
        "spawn-child" => {
            let (secs, file) = rest.split_once(char::is_whitespace).ok_or("usage: spawn-child <secs> <file>")?;
            let child = Command::new("sleep")
                .arg(secs.trim())
                .spawn()
                .map_err(|e| format!("spawn: {e}"))?;
            fs::write(file.trim(), child.id().to_string()).map_err(|e| format!("{file}: {e}"))?;
        }
        "append" => {
            let (file, line) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(file)
                .map_err(|e| format!("{file}: {e}"))?;
            writeln!(f, "{}", line.trim()).map_err(|e| e.to_string())?;
        }
        "exit" => {
            let code = rest.parse::<i32>().map_err(|_| format!("bad exit code `{rest}`"))?;
            let _ = std::io::stdout().flush();
            process::exit(code);
        }
        other => return Err(format!("unknown directive `{other}`")),
    }
    Ok(())
}
