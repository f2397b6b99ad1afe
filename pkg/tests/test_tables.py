import pytest

from atomwire.tables import COLUMNS, format_tables, load_reference_tables, mirror_from_block, within_factor


def test_embedded_tables_inventory():
    data = load_reference_tables()
    rows = [(t["id"], r["atom"], r["mirror"]) for t in data["tables"] for r in t["rows"]]
    assert len(rows) == 12
    assert {t["layout"] for t in data["tables"]} == {"wire", "dot"}
    first = data["tables"][0]["rows"][data["tables"][0]["calibration_row"]]
    assert (first["depth"], first["distance"]) == (-5.05, 0.60)


def test_mirror_block_is_strict():
    with pytest.raises(ValueError):
        mirror_from_block({"kind": "magnetic", "barrier_height": "1 ueV", "decay_length": "1 um", "extra": 1})
    with pytest.raises(ValueError):
        mirror_from_block({"kind": "magnetic", "barrier_height": "1 ueV"})


def test_calibration_scales(table_run):
    _, scales = table_run
    assert scales[1] == pytest.approx(0.955442, rel=1e-4)
    assert scales[2] == pytest.approx(1.01619, rel=1e-4)


def test_calibration_rows_reproduce_depth(table_run):
    results, _ = table_run
    for r in results:
        if r.index == 0:
            assert r.computed["depth"] == pytest.approx(r.reference["depth"], rel=1e-6)


def test_ratio_is_computed_over_reference(table_run):
    results, _ = table_run
    r = results[0]
    assert r.ratios()["distance"] == pytest.approx(r.computed["distance"] / r.reference["distance"])
    magnetic = [r for r in results if r.mirror == "magnetic"]
    assert all(r.ratios()["scat"] is None for r in magnetic)


def test_text_rendering_lists_every_row(table_run):
    text = format_tables(*table_run)
    assert text.count("Table ") == 2
    assert all(label in text for _, label in COLUMNS)
    assert len([line for line in text.splitlines() if "evanescent" in line or "magnetic" in line]) == 12


def test_within_factor():
    assert within_factor(-2.0, -1.0, 3)
    assert not within_factor(-4.0, -1.0, 3)
    assert not within_factor(1.0, -1.0, 3)
    assert not within_factor(None, 1.0, 3)
