import pytest

from gridwire.errors import MapError
from gridwire.pointmap import (
    AutogenPolicy,
    DeviceType,
    DNP3Point,
    OutstationDef,
    PointField,
    PointMap,
    PointType,
    autogen_map,
    dump_map,
    parse_map,
    parse_tag,
    tag_name,
    validate_map,
)

SUBSTATION_560_MAP = """
outstations:
  - number: 560
    name: GLEN ROSE1
    points:
      - {type: BinaryInput,  index: 0, device: Generator, key: "5262_1", field: STATUS, class: 1}
      - {type: AnalogInput,  index: 0, device: Generator, key: "5262_1", field: MW,   class: 2, deadband: 30.0}
      - {type: AnalogInput,  index: 1, device: Generator, key: "5262_1", field: MVAR, class: 2, deadband: 30.0}
      - {type: AnalogOutput, index: 0, device: Generator, key: "5262_1", field: MWSETPOINT}
      - {type: BinaryOutput, index: 0, device: Generator, key: "5262_1", field: STATUS}
      - {type: BinaryInput,  index: 1, device: Branch, key: "5047_5260_1", field: STATUS, class: 1}
      - {type: AnalogInput,  index: 2, device: Branch, key: "5047_5260_1", field: MW,   class: 2, deadband: 24.0}
      - {type: AnalogInput,  index: 3, device: Branch, key: "5047_5260_1", field: MVAR, class: 2, deadband: 24.0}
      - {type: BinaryOutput, index: 1, device: Branch, key: "5047_5260_1", field: STATUS}
"""


def test_substation_560_map_parses_and_round_trips(glenrose_case):
    point_map = parse_map(SUBSTATION_560_MAP, glenrose_case)
    station = point_map.by_number[560]
    assert station.name == "GLEN ROSE1"
    assert len(station.points) == 9
    again = parse_map(dump_map(point_map), glenrose_case)
    assert again == point_map


def test_setpoint_on_branch_is_illegal():
    text = """
outstations:
  - number: 1
    points:
      - {type: AnalogOutput, index: 0, device: Branch, key: "1_2_1", field: MWSETPOINT}
"""
    with pytest.raises(MapError, match="not legal"):
        parse_map(text)


def test_empty_outstation_is_valid():
    point_map = parse_map("outstations:\n  - number: 42\n")
    assert point_map.by_number[42].points == ()


def test_duplicate_index_rejected():
    text = """
outstations:
  - number: 1
    points:
      - {type: BinaryInput, index: 0, device: Bus, key: "1", field: STATUS}
      - {type: BinaryInput, index: 0, device: Bus, key: "2", field: STATUS}
"""
    with pytest.raises(MapError, match="duplicate BinaryInput index 0"):
        parse_map(text)


def test_index_gap_rejected():
    text = """
outstations:
  - number: 1
    points:
      - {type: BinaryInput, index: 0, device: Bus, key: "1", field: STATUS}
      - {type: BinaryInput, index: 2, device: Bus, key: "2", field: STATUS}
"""
    with pytest.raises(MapError, match="contiguous"):
        parse_map(text)


def test_unknown_device_rejected_against_case(glenrose_case):
    text = """
outstations:
  - number: 560
    points:
      - {type: BinaryInput, index: 0, device: Generator, key: "9999_9", field: STATUS}
"""
    with pytest.raises(MapError, match="no such device"):
        parse_map(text, glenrose_case)


def test_duplicate_outstation_number_rejected():
    text = """
outstations:
  - number: 7
  - number: 7
"""
    with pytest.raises(MapError, match="duplicate outstation"):
        parse_map(text)


def test_tag_name_pattern():
    station = OutstationDef(number=560, name="x")
    branch_point = DNP3Point(
        PointType.ANALOG_INPUT, 3, DeviceType.BRANCH, "5047_5260_1", PointField.MVAR
    )
    assert tag_name(branch_point, station) == "AI_560_Branch_5047_5260_1_MVAR"
    gen_point = DNP3Point(
        PointType.BINARY_OUTPUT, 0, DeviceType.GENERATOR, "5262_1", PointField.STATUS
    )
    assert tag_name(gen_point, station) == "BO_560_Generator_5262_1_STATUS"


def test_parse_tag_inverts_tag_name():
    abbrev, number, device, key, data_field = parse_tag("AI_560_Branch_5047_5260_1_MVAR")
    assert abbrev == "AI"
    assert number == 560
    assert device is DeviceType.BRANCH
    assert key == "5047_5260_1"
    assert data_field is PointField.MVAR
    with pytest.raises(MapError):
        parse_tag("notatag")


def test_tags_injective_on_valid_maps(glenrose_case):
    point_map = autogen_map(glenrose_case)
    total_points = sum(len(s.points) for s in point_map.outstations)
    assert len(point_map.tags) == total_points
    # and resolve() inverts tag_name()
    for tag, (station, point) in point_map.tags.items():
        assert tag_name(point, station) == tag
        assert point_map.resolve(tag) == (station, point)


def test_autogen_glenrose_single_outstation(glenrose_case):
    point_map = autogen_map(glenrose_case)
    assert len(point_map.outstations) == 1
    assert point_map.outstations[0].number == 560


def test_autogen_twobus_counts(twobus_case):
    point_map = autogen_map(twobus_case)
    assert sorted(s.number for s in point_map.outstations) == [1, 2]
    station1 = point_map.by_number[1]
    # gen (6 points) + branch (4) + bus (2)
    assert len(station1.points) == 12
    assert len(station1.by_type(PointType.ANALOG_OUTPUT)) == 2
    station2 = point_map.by_number[2]
    # load (4 points) + bus (2)
    assert len(station2.points) == 6
    assert len(station2.by_type(PointType.BINARY_OUTPUT)) == 1


def test_autogen_is_deterministic(glenrose_case):
    assert autogen_map(glenrose_case) == autogen_map(glenrose_case)


def test_autogen_deadband_policy(twobus_case):
    point_map = autogen_map(twobus_case, AutogenPolicy())
    station1 = point_map.by_number[1]
    gen_mw = next(
        p for p in station1.points
        if p.point_type == PointType.ANALOG_INPUT and p.field == PointField.MW
        and p.device_type == DeviceType.GENERATOR
    )
    assert gen_mw.deadband == pytest.approx(0.02 * 200.0)
    bus_vpu = next(
        p for p in station1.points
        if p.field == PointField.VPU
    )
    assert bus_vpu.deadband == pytest.approx(0.005)
    branch_mw = next(
        p for p in station1.points
        if p.device_type == DeviceType.BRANCH and p.field == PointField.MW
    )
    assert branch_mw.deadband == pytest.approx(0.02 * 150.0)


def test_autogen_event_class_defaults(twobus_case):
    point_map = autogen_map(twobus_case)
    for station in point_map.outstations:
        for p in station.points:
            if p.point_type == PointType.BINARY_INPUT:
                assert p.event_class == 1
            elif p.point_type == PointType.ANALOG_INPUT:
                assert p.event_class == 2
            else:
                assert p.event_class == 0


def test_counter_input_accepted_with_analog_fields():
    point_map = validate_map(
        PointMap(
            outstations=(
                OutstationDef(
                    number=1,
                    name="c",
                    points=(
                        DNP3Point(
                            PointType.COUNTER_INPUT, 0, DeviceType.BRANCH, "1_2_1",
                            PointField.MW,
                        ),
                    ),
                ),
            )
        )
    )
    assert point_map.by_number[1].points[0].point_type is PointType.COUNTER_INPUT


def test_out_of_range_outstation_number():
    with pytest.raises(MapError, match="outside"):
        parse_map("outstations:\n  - number: 70000\n")
