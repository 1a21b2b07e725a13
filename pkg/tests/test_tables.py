import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from summarycorr.errors import InputFormatError, ValidationError
from summarycorr.model import StudySummary
from summarycorr.tables import (
    SummaryRow,
    SummaryTable,
    parse_summary_table,
    read_summary_table,
    write_summary_table,
)

HEADER = "study_id,n,mean_x,mean_y,var_x,var_y\n"


def parse(text, **kw):
    return parse_summary_table(io.StringIO(text), **kw)


def test_basic_parse():
    table = parse(HEADER + "a,10,0.1,0.2,1.5,2.5\nb,20,-1,1,0.5,0.25\n")
    assert [r.study_id for r in table.rows] == ["a", "b"]
    assert table.studies()[1] == StudySummary(20, -1.0, 1.0, 0.5, 0.25)


def test_columns_in_any_order():
    table = parse("n,var_y,var_x,mean_y,mean_x,study_id\n10,2,3,4,5,s\n")
    assert table.studies()[0] == StudySummary(10, 5.0, 4.0, 3.0, 2.0)


def test_sd_columns_are_squared():
    table = parse("study_id,n,mean_x,mean_y,sd_x,sd_y\na,10,0,0,2,0.5\n", sd=True)
    s = table.studies()[0]
    assert (s.var_x, s.var_y) == (4.0, 0.25)


def test_groups_keep_order():
    text = "study_id,n,mean_x,mean_y,var_x,var_y,center\n" + "\n".join(
        f"s{i},10,0,0,1,1,{g}" for i, g in enumerate("BABCA")
    )
    groups = parse(text, group_by="center").groups()
    assert list(groups) == ["B", "A", "C"]
    assert [len(v) for v in groups.values()] == [2, 2, 1]


def test_same_id_allowed_in_different_groups():
    text = "study_id,n,mean_x,mean_y,var_x,var_y,g\na,10,0,0,1,1,x\na,10,0,0,1,1,y\n"
    assert len(parse(text, group_by="g").rows) == 2
    with pytest.raises(ValidationError, match="duplicate"):
        parse(HEADER + "a,10,0,0,1,1\na,12,0,0,1,1\n")


def test_small_n_names_row_and_rule():
    with pytest.raises(ValidationError) as info:
        parse(HEADER + "a,10,0,0,1,1\nb,2,0,0,1,1\n")
    assert info.value.row == 3
    assert "row 3" in str(info.value) and "n >= 3" in str(info.value)


@pytest.mark.parametrize(
    "line,column",
    [("a,ten,0,0,1,1", "n"), ("a,10,x,0,1,1", "mean_x"), ("a,10,0,0,inf,1", "var_x"), ("a,10.5,0,0,1,1", "n")],
)
def test_bad_cells(line, column):
    with pytest.raises(InputFormatError) as info:
        parse(HEADER + line + "\n")
    assert info.value.row == 2 and info.value.column == column


def test_nonpositive_variance():
    with pytest.raises(ValidationError) as info:
        parse(HEADER + "a,10,0,0,1,0\n")
    assert info.value.column == "var_y"


def test_structural_errors():
    with pytest.raises(InputFormatError):
        parse("")
    with pytest.raises(InputFormatError, match="missing"):
        parse("study_id,n,mean_x\n")
    with pytest.raises(InputFormatError, match="missing"):
        parse(HEADER, group_by="center")
    with pytest.raises(InputFormatError, match="fields"):
        parse(HEADER + "a,10,0,0,1\n")
    with pytest.raises(InputFormatError, match="study_id"):
        parse(HEADER + ",10,0,0,1,1\n")
    with pytest.raises(ValidationError, match="no studies"):
        parse(HEADER)


def test_file_roundtrip(tmp_path):
    table = parse("study_id,n,mean_x,mean_y,var_x,var_y,g\na,10,0.1,0.2,1,2,x\nb,11,0.3,0.4,3,4,y\n", group_by="g")
    path = tmp_path / "t.csv"
    text = write_summary_table(table, path)
    assert path.read_bytes() == text.encode()
    assert "\r\n" in text
    again = read_summary_table(path, group_by="g")
    assert again.rows == table.rows


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
positive = st.floats(1e-8, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=100, deadline=None)
@given(
    rows=st.lists(
        st.tuples(st.integers(3, 10**6), finite, finite, positive, positive), min_size=1, max_size=10
    )
)
def test_parse_serialize_lossless_property(rows):
    table = SummaryTable([SummaryRow(f"s{i}", StudySummary(*r)) for i, r in enumerate(rows)])
    text = write_summary_table(table)
    again = parse(text)
    assert again.studies() == table.studies()
    assert write_summary_table(again) == text
