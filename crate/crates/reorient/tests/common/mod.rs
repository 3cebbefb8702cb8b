#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reorient::formats::write_obj;

#[path = "../../../core/tests/common/mod.rs"]
mod shapes;

#[allow(unused_imports)]
pub use shapes::{cube, lumpy, CUBE_OBJ};

/// Writes `cube.obj` plus `lump{n}.obj` for each requested variant.
pub fn write_corpus(dir: &Path, with_cube: bool, lumps: &[usize]) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    if with_cube {
        std::fs::write(dir.join("cube.obj"), CUBE_OBJ).unwrap();
    }
    for &v in lumps {
        write_obj(dir.join(format!("lump{v}.obj")), &lumpy(v)).unwrap();
    }
    dir.to_path_buf()
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("data")
}

pub fn reorient(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reorient"))
        .args(args)
        .env_remove("REORIENT_THREADS")
        .output()
        .expect("binary runs")
}

pub fn reorient_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reorient"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Every file under `root`, relative path and contents, sorted.
pub fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push((
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                ));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
