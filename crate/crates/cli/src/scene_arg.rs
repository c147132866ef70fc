//! `--scene` values: a JSON scene file or `generator[:key=value,...]`.

use std::path::PathBuf;

use rlcuts::scene::{
    gen_cornell_grid_with, gen_window_room_with, load_scene, CornellGridParams, WindowRoomParams,
};
use rlcuts::Scene;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum SceneArg {
    CornellGrid(CornellGridParams),
    WindowRoom(WindowRoomParams),
    File(PathBuf),
}

impl SceneArg {
    /// Generator keys:
    ///
    /// * `cornell_grid`: `k`, `seed`, `dome_triangles`, `dome_emission`, `light_emission`
    /// * `window_room`: `n`, `seed`, `dome_triangles`, `dome_emission`, `wall` (0/1),
    ///   `window_width`, `sill`, `lintel`
    ///
    /// Anything that is not a generator name is taken as a path.
    pub fn parse(s: &str) -> Result<SceneArg, CliError> {
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n, p),
            None => (s, ""),
        };
        let pairs = || {
            params
                .split(',')
                .filter(|kv| !kv.trim().is_empty())
                .map(|kv| {
                    kv.split_once('=')
                        .map(|(k, v)| (k.trim(), v.trim()))
                        .ok_or_else(|| CliError::Usage(format!("scene parameter '{kv}' is not key=value")))
                })
        };
        match name {
            "cornell_grid" => {
                let mut p = CornellGridParams::default();
                for kv in pairs() {
                    let (k, v) = kv?;
                    match k {
                        "k" => p.k = num(k, v)?,
                        "seed" => p.seed = num(k, v)?,
                        "dome_triangles" => p.dome_triangles = num(k, v)?,
                        "dome_emission" => p.dome_emission = num(k, v)?,
                        "light_emission" => p.light_emission = num(k, v)?,
                        _ => return Err(unknown_key(name, k)),
                    }
                }
                Ok(SceneArg::CornellGrid(p))
            }
            "window_room" => {
                let mut p = WindowRoomParams::default();
                for kv in pairs() {
                    let (k, v) = kv?;
                    match k {
                        "n" | "n_windows" => p.n_windows = num(k, v)?,
                        "seed" => p.seed = num(k, v)?,
                        "dome_triangles" => p.dome_triangles = num(k, v)?,
                        "dome_emission" => p.dome_emission = num(k, v)?,
                        "wall" => p.window_wall = num::<u8>(k, v)? != 0,
                        "window_width" => p.window_width = num(k, v)?,
                        "sill" => p.window_sill = num(k, v)?,
                        "lintel" => p.window_lintel = num(k, v)?,
                        _ => return Err(unknown_key(name, k)),
                    }
                }
                Ok(SceneArg::WindowRoom(p))
            }
            _ => Ok(SceneArg::File(PathBuf::from(s))),
        }
    }

    /// Builds the scene. `width`/`height` override the camera resolution when given.
    pub fn build(&self, width: Option<usize>, height: Option<usize>) -> Result<Scene, CliError> {
        let mut scene = match self {
            SceneArg::CornellGrid(p) => gen_cornell_grid_with(p)?,
            SceneArg::WindowRoom(p) => gen_window_room_with(p)?,
            SceneArg::File(path) => load_scene(path)?,
        };
        let cam = scene.camera;
        scene.camera = cam.with_resolution(width.unwrap_or(cam.width), height.unwrap_or(cam.height));
        if scene.camera.width == 0 || scene.camera.height == 0 {
            return Err(CliError::Usage("image resolution must be positive".into()));
        }
        Ok(scene)
    }

    /// Short identifier used in tables and file names.
    pub fn id(&self) -> String {
        match self {
            SceneArg::CornellGrid(p) => format!("cornell_grid_k{}_s{}", p.k, p.seed),
            SceneArg::WindowRoom(p) => format!("window_room_n{}_s{}", p.n_windows, p.seed),
            SceneArg::File(path) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scene".into()),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("bad value '{v}' for scene parameter '{key}'")))
}

fn unknown_key(generator: &str, key: &str) -> CliError {
    CliError::Usage(format!("unknown {generator} parameter '{key}'"))
}
