"""Tests for dataset formats and the synthetic scene generator."""

import json

import numpy as np
import pytest
from PIL import Image
from plyfile import PlyData, PlyElement

from core.config.settings import build_model
from core.errors import (
    ChannelCountError,
    ConfigurationError,
    EmptySceneError,
    InvalidParameterError,
    ParseError,
    SchemaError,
    ShapeError,
    UnsupportedModelError,
)
from core.io import (
    BoxSpec,
    CameraRingSpec,
    Dataset,
    PlaneSpec,
    SynthSceneSpec,
    View,
    gen_synth_scene,
    load_colmap_text,
    load_dataset,
    load_gaussians_ply,
    ply_property_names,
    read_pfm,
    read_png,
    save_dataset,
    save_gaussians_ply,
    write_colmap_text,
    write_pfm,
    write_png,
)
from core.scene import reprojection_error
from core.io.synth import TextureSpec, _Box, _Texture
from core.scene.geometry import Observation, SparsePoint

CAMERAS_TXT = """# Camera list with one line of data per camera:
#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]
1 PINHOLE 100 80 120.0 120.0 50.5 40.5
"""

IMAGES_TXT = """# Image list with two lines of data per image:
#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME
1 1 0 0 0 0 0 0 1 left.png
50.5 40.5 1 10.5 20.5 -1
2 1 0 0 0 -0.5 0 0 1 right.png
38.5 40.5 1
"""

POINTS_TXT = """# 3D point list with one line of data per point:
1 0 0 5 255 0 128 0.1 1 0 2 0
"""


def write_model(directory, cameras=CAMERAS_TXT, images=IMAGES_TXT, points=POINTS_TXT):
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "cameras.txt").write_text(cameras)
    (directory / "images.txt").write_text(images)
    (directory / "points3D.txt").write_text(points)
    return directory


class TestColmap:
    """Test the COLMAP text model reader and writer."""

    def test_load_minimal_model(self, tmp_path):
        dataset = load_colmap_text(write_model(tmp_path / "model"))
        assert [v.id for v in dataset.views] == ["left", "right"]
        cam = dataset.view("left").camera
        assert (cam.fx, cam.fy, cam.cx, cam.cy) == (120.0, 120.0, 50.0, 40.0)
        assert cam.shape == (80, 100)
        assert np.allclose(dataset.view("right").camera.center, [0.5, 0.0, 0.0])
        assert np.all(dataset.view("left").image == 0.0)

        assert len(dataset.points) == 1
        point = dataset.points[0]
        assert np.allclose(point.position, [0.0, 0.0, 5.0])
        assert point.color == pytest.approx((1.0, 0.0, 128 / 255))
        assert [o.view_id for o in point.observations] == ["left", "right"]
        assert point.observations[0].pixel == (50.0, 40.0)
        assert point.observations[1].pixel == (38.0, 40.0)

    def test_points_reproject_exactly(self, tmp_path):
        dataset = load_colmap_text(write_model(tmp_path / "model"))
        total, report = reprojection_error(dataset.points, dataset.cameras)
        assert total == pytest.approx(0.0, abs=1e-20)
        assert report.num_used == 2

    def test_simple_pinhole(self, tmp_path):
        cameras = "1 SIMPLE_PINHOLE 100 80 90.0 50.5 40.5\n"
        dataset = load_colmap_text(write_model(tmp_path / "model", cameras=cameras))
        cam = dataset.view("left").camera
        assert cam.fx == cam.fy == 90.0

    def test_images_are_read(self, tmp_path):
        directory = write_model(tmp_path / "model")
        (directory / "images").mkdir()
        image = np.zeros((80, 100, 3))
        image[:, :50] = 1.0
        write_png(directory / "images" / "left.png", image)
        dataset = load_colmap_text(directory)
        assert np.array_equal(dataset.view("left").image, image)

    def test_radial_model_rejected(self, tmp_path):
        cameras = "1 RADIAL 100 80 120.0 50.5 40.5 0.01 0.0\n"
        with pytest.raises(UnsupportedModelError) as exc:
            load_colmap_text(write_model(tmp_path / "model", cameras=cameras))
        assert exc.value.model == "RADIAL"

    def test_bad_camera_number_reports_line(self, tmp_path):
        cameras = "# header\n# header\n1 PINHOLE 100 80 abc 120.0 50.5 40.5\n"
        with pytest.raises(ParseError) as exc:
            load_colmap_text(write_model(tmp_path / "model", cameras=cameras))
        assert exc.value.line_number == 3

    def test_wrong_parameter_count(self, tmp_path):
        cameras = "1 PINHOLE 100 80 120.0 50.5 40.5\n"
        with pytest.raises(ParseError) as exc:
            load_colmap_text(write_model(tmp_path / "model", cameras=cameras))
        assert exc.value.line_number == 1

    def test_unknown_image_in_track(self, tmp_path):
        points = "# header\n1 0 0 5 255 0 128 0.1 1 0 7 0\n"
        with pytest.raises(ParseError) as exc:
            load_colmap_text(write_model(tmp_path / "model", points=points))
        assert exc.value.line_number == 2

    def test_track_index_out_of_range(self, tmp_path):
        points = "1 0 0 5 255 0 128 0.1 1 5 2 0\n"
        with pytest.raises(ParseError):
            load_colmap_text(write_model(tmp_path / "model", points=points))

    def test_odd_keypoint_line(self, tmp_path):
        images = IMAGES_TXT.replace("38.5 40.5 1\n", "38.5 40.5\n")
        with pytest.raises(ParseError) as exc:
            load_colmap_text(write_model(tmp_path / "model", images=images))
        assert exc.value.line_number == 6

    def test_missing_file(self, tmp_path):
        directory = write_model(tmp_path / "model")
        (directory / "points3D.txt").unlink()
        with pytest.raises(ParseError):
            load_colmap_text(directory)

    def test_write_then_load(self, tmp_path):
        original = load_colmap_text(write_model(tmp_path / "model"))
        write_colmap_text(original, tmp_path / "copy")
        loaded = load_colmap_text(tmp_path / "copy")
        assert [v.id for v in loaded.views] == ["left", "right"]
        for a, b in zip(original.views, loaded.views):
            assert (a.camera.fx, a.camera.cx, a.camera.cy) == (b.camera.fx, b.camera.cx, b.camera.cy)
            assert np.allclose(a.camera.rotation, b.camera.rotation, atol=1e-12)
            assert np.allclose(a.camera.translation, b.camera.translation, atol=1e-12)
        assert [o.pixel for o in loaded.points[0].observations] == [(50.0, 40.0), (38.0, 40.0)]


class TestPly:
    """Test Gaussian checkpoints."""

    def test_save_then_load(self, tmp_path, cloud_factory):
        rng = np.random.default_rng(0)
        cloud = cloud_factory(rng.normal(size=(5, 3)), scales=rng.uniform(0.1, 1, size=(5, 3)),
                              opacities=rng.uniform(0.1, 0.9, 5), colors=rng.uniform(0, 1, size=(5, 3)),
                              rotations=rng.normal(size=(5, 4)), sh_degree=2)
        cloud.sh_coeffs[:, 1:, :] = rng.normal(size=cloud.sh_coeffs[:, 1:, :].shape)
        path = save_gaussians_ply(cloud, tmp_path / "cloud.ply")
        loaded = load_gaussians_ply(path)
        assert loaded.sh_degree == 2
        assert len(loaded) == 5
        for name, arr in cloud.params().items():
            np.testing.assert_allclose(getattr(loaded, name), arr, rtol=1e-6, atol=1e-6, err_msg=name)

    def test_property_layout(self):
        names = ply_property_names(1)
        assert names[:9] == ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        assert names[9:18] == [f"f_rest_{i}" for i in range(9)]
        assert names[18:] == ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]

    def test_missing_opacity(self, tmp_path):
        names = [n for n in ply_property_names(0) if n != "opacity"]
        vertices = np.zeros(2, dtype=[(n, "f4") for n in names])
        PlyData([PlyElement.describe(vertices, "vertex")]).write(str(tmp_path / "bad.ply"))
        with pytest.raises(SchemaError) as exc:
            load_gaussians_ply(tmp_path / "bad.ply")
        assert exc.value.missing == ["opacity"]

    def test_garbage_file(self, tmp_path):
        path = tmp_path / "garbage.ply"
        path.write_bytes(b"not a ply file at all")
        with pytest.raises(ParseError):
            load_gaussians_ply(path)


class TestPfm:
    """Test depth map files."""

    def test_write_then_read(self, tmp_path):
        rng = np.random.default_rng(1)
        depth = rng.uniform(1, 10, size=(7, 5))
        valid = rng.uniform(size=(7, 5)) > 0.3
        write_pfm(tmp_path / "d.pfm", depth, valid)
        data, mask = read_pfm(tmp_path / "d.pfm")
        assert data.dtype == np.float32
        assert np.array_equal(mask, valid)
        assert np.array_equal(data[valid], depth.astype(np.float32)[valid])
        assert np.all(data[~valid] == 0.0)

    def test_rows_stored_bottom_first(self, tmp_path):
        depth = np.arange(6, dtype=np.float64).reshape(3, 2) + 1.0
        write_pfm(tmp_path / "d.pfm", depth)
        buf = (tmp_path / "d.pfm").read_bytes()
        header = b"Pf\n2 3\n-1.0\n"
        assert buf.startswith(header)
        payload = np.frombuffer(buf[len(header):], dtype="<f4")
        assert payload[:2].tolist() == [5.0, 6.0]

    def test_big_endian(self, tmp_path):
        depth = np.array([[1.5, 2.5], [3.5, 4.5]])
        write_pfm(tmp_path / "d.pfm", depth, little_endian=False)
        data, _ = read_pfm(tmp_path / "d.pfm")
        assert np.array_equal(data, depth.astype(np.float32))

    def test_exact_payload(self, tmp_path):
        path = tmp_path / "d.pfm"
        path.write_bytes(b"Pf\n2 2\n-1.0\n" + np.array([1, 2, 3, 4], dtype="<f4").tobytes())
        data, _ = read_pfm(path)
        assert data.tolist() == [[3.0, 4.0], [1.0, 2.0]]

    def test_short_payload(self, tmp_path):
        path = tmp_path / "d.pfm"
        path.write_bytes(b"Pf\n2 2\n-1.0\n" + np.array([1, 2, 3], dtype="<f4").tobytes())
        with pytest.raises(ParseError):
            read_pfm(path)

    def test_color_file_rejected(self, tmp_path):
        path = tmp_path / "c.pfm"
        path.write_bytes(b"PF\n1 1\n-1.0\n" + np.zeros(3, dtype="<f4").tobytes())
        with pytest.raises(ChannelCountError):
            read_pfm(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.pfm"
        path.write_bytes(b"P6\n1 1\n255\n")
        with pytest.raises(ParseError) as exc:
            read_pfm(path)
        assert exc.value.line_number == 1

    def test_bad_dimensions(self, tmp_path):
        path = tmp_path / "x.pfm"
        path.write_bytes(b"Pf\n2 x\n-1.0\n")
        with pytest.raises(ParseError) as exc:
            read_pfm(path)
        assert exc.value.line_number == 2

    def test_zero_scale(self, tmp_path):
        path = tmp_path / "x.pfm"
        path.write_bytes(b"Pf\n1 1\n0\n" + np.zeros(1, dtype="<f4").tobytes())
        with pytest.raises(ParseError) as exc:
            read_pfm(path)
        assert exc.value.line_number == 3

    def test_three_dimensional_input_rejected(self, tmp_path):
        with pytest.raises(ChannelCountError):
            write_pfm(tmp_path / "x.pfm", np.zeros((2, 2, 3)))


class TestPng:
    """Test 8-bit images."""

    def test_quantized_round_trip(self, tmp_path):
        image = np.random.default_rng(2).uniform(0, 1, size=(6, 9, 3))
        write_png(tmp_path / "a.png", image)
        loaded = read_png(tmp_path / "a.png")
        assert loaded.shape == (6, 9, 3)
        assert np.max(np.abs(loaded - image)) <= 0.5 / 255 + 1e-12

    def test_values_clipped(self, tmp_path):
        write_png(tmp_path / "a.png", np.full((2, 2, 3), 1.7))
        assert np.all(read_png(tmp_path / "a.png") == 1.0)

    def test_grayscale_file_read_as_rgb(self, tmp_path):
        Image.fromarray(np.full((3, 4), 51, dtype=np.uint8)).save(tmp_path / "g.png")
        loaded = read_png(tmp_path / "g.png")
        assert loaded.shape == (3, 4, 3)
        assert np.allclose(loaded, 0.2)

    def test_wrong_shape(self, tmp_path):
        with pytest.raises(ShapeError):
            write_png(tmp_path / "a.png", np.zeros((4, 4)))

    def test_garbage_file(self, tmp_path):
        (tmp_path / "bad.png").write_bytes(b"\x00\x01 nope")
        with pytest.raises(ParseError):
            read_png(tmp_path / "bad.png")


def single_camera_spec(planes, **kwargs):
    return SynthSceneSpec(
        planes=planes,
        cameras=CameraRingSpec(count=1, radius=5.0, target=(0.0, 0.0, 5.0)),
        image_size=(24, 18),
        num_points=0,
        **kwargs,
    )


class TestSynth:
    """Test the ray-traced scene generator."""

    def test_fronto_parallel_plane(self):
        dataset = gen_synth_scene(single_camera_spec([PlaneSpec(center=(0.0, 0.0, 5.0), size=(40.0, 40.0))]))
        view = dataset.views[0]
        assert view.id == "view_000"
        assert np.allclose(view.camera.center, 0.0)
        np.testing.assert_allclose(view.gt_depth, 5.0, rtol=0, atol=1e-9)

    def test_nearest_surface_wins(self):
        spec = single_camera_spec([
            PlaneSpec(center=(0.0, 0.0, 5.0), size=(40.0, 40.0)),
            PlaneSpec(center=(0.0, 0.0, 3.0), size=(1.0, 1.0)),
        ])
        depth = gen_synth_scene(spec).views[0].gt_depth
        near = np.isclose(depth, 3.0, atol=1e-9)
        far = np.isclose(depth, 5.0, atol=1e-9)
        assert np.all(near | far)
        assert near[9, 11] and near[8, 12]
        assert far[0, 0] and far[17, 23]

    def test_background_where_nothing_is_hit(self):
        spec = single_camera_spec([PlaneSpec(center=(0.0, 0.0, 5.0), size=(0.5, 0.5))], background=(0.2, 0.4, 0.6))
        view = gen_synth_scene(spec).views[0]
        assert view.gt_depth[0, 0] == 0.0
        assert np.allclose(view.image[0, 0], (0.2, 0.4, 0.6))
        assert view.gt_depth[9, 11] > 0.0

    def test_tilted_plane_depth_follows_plane_equation(self):
        center = np.array([0.0, 0.0, 5.0])
        normal = np.array([-0.5, 0.0, -1.0])
        spec = single_camera_spec([PlaneSpec(center=tuple(center), normal=tuple(normal), size=(40.0, 40.0))])
        view = gen_synth_scene(spec).views[0]
        cam = view.camera
        for v, u in [(0, 0), (9, 11), (17, 23)]:
            ray = np.array([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0]) @ cam.rotation
            expected = ((center - cam.center) @ normal) / (ray @ normal)
            assert view.gt_depth[v, u] == pytest.approx(expected, rel=1e-12)
            hit = cam.center + view.gt_depth[v, u] * ray
            assert (hit - center) @ normal == pytest.approx(0.0, abs=1e-9)
        # tilt about the y axis: depth changes across columns only
        np.testing.assert_allclose(view.gt_depth, np.broadcast_to(view.gt_depth[0], view.gt_depth.shape), rtol=1e-12)
        assert np.all(np.diff(view.gt_depth[0]) != 0.0)

    def test_box_front_face_depth(self):
        spec = single_camera_spec([PlaneSpec(center=(0.0, 0.0, 8.0), size=(40.0, 40.0))],
                                  boxes=[BoxSpec(center=(0.0, 0.0, 5.0), size=(2.0, 2.0, 2.0))])
        view = gen_synth_scene(spec).views[0]
        depth = view.gt_depth
        front = np.isclose(depth, 4.0, atol=1e-9)
        back = np.isclose(depth, 8.0, atol=1e-9)
        assert np.all(front | back)
        assert front[9, 11] and front[8, 12]
        assert back[0, 0] and back[17, 23]

    def test_box_face_hit(self):
        box = _Box(BoxSpec(center=(0.0, 0.0, 5.0), size=(2.0, 2.0, 2.0)),
                   _Texture(TextureSpec(kind="checker"), np.random.default_rng(0)))
        origins = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 10.0], [0.0, 0.0, 0.0], [0.0, 0.0, 5.0]])
        dirs = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        t, st, face = box.intersect(origins, dirs)
        assert t[0] == pytest.approx(4.0)
        assert face[0] == 5
        np.testing.assert_allclose(st[0], [1.0, 1.0])
        assert t[1] == pytest.approx(4.0)
        assert face[1] == 4
        assert np.isinf(t[2])
        # ray starting inside the box
        assert np.isinf(t[3])

    def test_no_primitives(self):
        with pytest.raises(EmptySceneError):
            gen_synth_scene(single_camera_spec([]))

    def test_primitive_behind_camera(self):
        with pytest.raises(EmptySceneError):
            gen_synth_scene(single_camera_spec([PlaneSpec(center=(0.0, 0.0, -5.0))]))

    def test_split_validation(self):
        with pytest.raises(ConfigurationError):
            build_model(SynthSceneSpec, {"cameras": {"count": 2}, "test_views": [0, 1]})
        with pytest.raises(ConfigurationError):
            build_model(SynthSceneSpec, {"cameras": {"count": 2}, "test_views": [2]})

    def test_tiny_scene_split(self, tiny_scene):
        assert len(tiny_scene.views) == 6
        assert tiny_scene.test_ids == ["view_003"]
        assert "view_003" not in tiny_scene.train_ids
        assert len(tiny_scene.train_ids) == 5

    def test_sparse_points_reproject(self, tiny_scene):
        assert len(tiny_scene.points) > 0
        assert all(len(p.observations) >= 2 for p in tiny_scene.points)
        total, report = reprojection_error(tiny_scene.points, tiny_scene.cameras)
        assert report.num_behind == 0
        assert total / report.num_used < 1e-12

    def test_deterministic(self, tiny_scene_spec, tiny_scene):
        again = gen_synth_scene(tiny_scene_spec)
        for a, b in zip(tiny_scene.views, again.views):
            assert np.array_equal(a.image, b.image)
            assert np.array_equal(a.gt_depth, b.gt_depth)
        assert np.array_equal(tiny_scene.point_array(), again.point_array())


class TestDatasetStore:
    """Test saving and loading dataset directories."""

    def test_save_then_load(self, tmp_path, tiny_scene):
        save_dataset(tiny_scene, tmp_path / "scene")
        loaded = load_dataset(tmp_path / "scene")
        assert loaded.name == tiny_scene.name
        assert loaded.train_ids == tiny_scene.train_ids
        assert loaded.test_ids == tiny_scene.test_ids
        assert len(loaded.points) == len(tiny_scene.points)
        np.testing.assert_allclose(loaded.point_array(), tiny_scene.point_array(), rtol=0, atol=1e-12)
        for a, b in zip(tiny_scene.views, loaded.views):
            assert a.id == b.id
            assert np.max(np.abs(a.image - b.image)) <= 0.5 / 255 + 1e-12
            np.testing.assert_allclose(b.gt_depth, a.gt_depth, rtol=1e-6)
            np.testing.assert_allclose(b.camera.rotation, a.camera.rotation, atol=1e-12)
            np.testing.assert_allclose(b.camera.translation, a.camera.translation, atol=1e-12)

    def test_prior_dir_override(self, tmp_path, tiny_scene):
        save_dataset(tiny_scene, tmp_path / "scene")
        loaded = load_dataset(tmp_path / "scene", prior_dir=tmp_path / "priors")
        assert loaded.prior_dir == tmp_path / "priors"

    def test_bad_metadata_json(self, tmp_path, tiny_scene):
        save_dataset(tiny_scene, tmp_path / "scene")
        (tmp_path / "scene" / "dataset.json").write_text('{\n  "name": "x",\n  oops\n}')
        with pytest.raises(ParseError) as exc:
            load_dataset(tmp_path / "scene")
        assert exc.value.line_number == 3

    def test_depth_for_unknown_view(self, tmp_path, tiny_scene):
        directory = save_dataset(tiny_scene, tmp_path / "scene")
        meta = json.loads((directory / "dataset.json").read_text())
        meta["gt_depth"]["ghost"] = meta["gt_depth"]["view_000"]
        (directory / "dataset.json").write_text(json.dumps(meta))
        with pytest.raises(ParseError):
            load_dataset(directory)

    def test_bare_colmap_model(self, tmp_path):
        dataset = load_dataset(write_model(tmp_path / "model"))
        assert dataset.train_ids == ["left", "right"]
        assert dataset.test_ids == []


class TestDataset:
    """Test dataset validation."""

    def test_duplicate_view_ids(self, pinhole_camera):
        view = View(id="a", image=np.zeros((100, 100, 3)), camera=pinhole_camera)
        with pytest.raises(InvalidParameterError):
            Dataset(views=[view, view])

    def test_image_shape_must_match_camera(self, pinhole_camera):
        with pytest.raises(ShapeError):
            View(id="a", image=np.zeros((10, 10, 3)), camera=pinhole_camera)

    def test_observation_of_unknown_view(self, pinhole_camera):
        view = View(id="a", image=np.zeros((100, 100, 3)), camera=pinhole_camera)
        point = SparsePoint(position=[0, 0, 1], observations=[Observation("b", (1.0, 1.0))])
        with pytest.raises(InvalidParameterError):
            Dataset(views=[view], points=[point])

    def test_default_split(self, pinhole_camera):
        views = [View(id=i, image=np.zeros((100, 100, 3)), camera=pinhole_camera) for i in "abc"]
        dataset = Dataset(views=views, test_ids=["b"])
        assert dataset.train_ids == ["a", "c"]
        assert [v.id for v in dataset.test_views] == ["b"]
