use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Camera, Material, Scene, Triangle};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    materials: Vec<Material>,
    triangles: Vec<Triangle>,
    camera: Camera,
}

/// Parses a scene document. Malformed JSON is [`Error::Parse`]; well-formed JSON with
/// the wrong shape is [`Error::Schema`]; a scene without emitters is [`Error::NoEmitters`].
pub fn scene_from_json(text: &str, origin: &Path) -> Result<Scene> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|source| Error::Parse {
        path: origin.to_path_buf(),
        source,
    })?;
    let file: SceneFile =
        serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    let scene = Scene::new(file.triangles, file.materials, file.camera)?;
    if scene.emitter_ids().is_empty() {
        return Err(Error::NoEmitters);
    }
    Ok(scene)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    scene_from_json(&text, path)
}

pub fn scene_to_json(scene: &Scene) -> String {
    let file = SceneFile {
        materials: scene.materials.clone(),
        triangles: scene.triangles.clone(),
        camera: scene.camera,
    };
    serde_json::to_string_pretty(&file).expect("scene values are always serializable")
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, scene_to_json(scene))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "materials": [ { "albedo": [0, 0, 0], "emission": [5, 5, 5] } ],
        "triangles": [
            { "p0": [0, 1, 0], "p1": [1, 1, 0], "p2": [1, 1, 1], "material": 0 },
            { "p0": [0, 1, 0], "p1": [1, 1, 1], "p2": [0, 1, 1], "material": 0 }
        ],
        "camera": { "origin": [0, 0, 3], "look_at": [0, 0, 0], "up": [0, 1, 0],
                    "vfov_degrees": 45, "width": 16, "height": 16 }
    }"#;

    #[test]
    fn minimal_file_loads() {
        let scene = scene_from_json(MINIMAL, Path::new("minimal.json")).unwrap();
        assert_eq!(scene.triangles.len(), 2);
        assert_eq!(scene.emitter_ids(), &[0, 1]);
        assert_eq!(scene.camera.width, 16);
    }

    #[test]
    fn missing_camera_is_schema_error() {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        v.as_object_mut().unwrap().remove("camera");
        let err = scene_from_json(&v.to_string(), Path::new("x.json")).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn broken_json_is_parse_error() {
        let err = scene_from_json("{ \"materials\": [", Path::new("x.json")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn zero_emitters_is_its_own_error() {
        let text = MINIMAL.replace("[5, 5, 5]", "[0, 0, 0]");
        let err = scene_from_json(&text, Path::new("x.json")).unwrap_err();
        assert!(matches!(err, Error::NoEmitters), "{err}");
    }

    #[test]
    fn bad_material_index_is_schema_error() {
        let text = MINIMAL.replacen("\"material\": 0", "\"material\": 3", 1);
        let err = scene_from_json(&text, Path::new("x.json")).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }
}
