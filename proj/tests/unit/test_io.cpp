#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "spatlog/io.hpp"

using namespace spatlog;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "spatlog_io_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(Io, NumRoundTrips) {
    for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0}) EXPECT_EQ(std::stod(io::num(x)), x);
}

TEST(Io, SnapshotRoundTrip1d) {
    Trajectory a, b;
    a.replica = 0;
    a.snapshots = {{0.0, {{1.25, 0}, {3.5, 0}}}, {2.0, {{0.1 + 0.2, 0}}}};
    b.replica = 1;
    b.snapshots = {{0.0, {{7.0, 0}}}, {2.0, {}}};
    io::write_snapshots(scratch("a.csv"), a, 1);
    io::write_snapshots(scratch("b.csv"), b, 1);
    io::SnapshotTable t;
    io::read_snapshots(scratch("a.csv"), t);
    io::read_snapshots(scratch("b.csv"), t);
    EXPECT_EQ(t.d, 1);
    ASSERT_EQ(t.times(), (std::vector<double>{0.0, 2.0}));
    const auto e0 = t.at(0.0);
    ASSERT_EQ(e0.size(), 2u);
    EXPECT_EQ(e0[0].size(), 2u);
    EXPECT_EQ(e0[1][0][0], 7.0);
    const auto e2 = t.at(2.0);
    EXPECT_EQ(e2[0][0][0], 0.1 + 0.2);  // exact through 17 digits
    EXPECT_TRUE(e2[1].empty());         // replica 1 died out: empty, not missing
    EXPECT_THROW(t.at(1.0), InvalidArgument);
}

TEST(Io, SnapshotRoundTrip2d) {
    Trajectory a;
    a.snapshots = {{1.5, {{0.5, 0.25}, {9.0, 8.0}}}};
    io::write_snapshots(scratch("c.csv"), a, 2);
    io::SnapshotTable t;
    io::read_snapshots(scratch("c.csv"), t);
    EXPECT_EQ(t.d, 2);
    const auto e = t.at(1.5);
    EXPECT_EQ(e[0][1][1], 8.0);
}

TEST(Io, MalformedSnapshotFilesAreRejected) {
    {
        std::ofstream f(scratch("bad_header.csv"));
        f << "time,x\n0,1\n";
    }
    {
        std::ofstream f(scratch("bad_row.csv"));
        f << "t,replica,particle_index,x0\n0,0,0,1\n0,zero,1,2\n";
    }
    io::SnapshotTable t;
    EXPECT_THROW(io::read_snapshots(scratch("bad_header.csv"), t), InvalidArgument);
    try {
        io::read_snapshots(scratch("bad_row.csv"), t);
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }
    EXPECT_THROW(io::read_snapshots(scratch("missing.csv"), t), InvalidArgument);
}

TEST(Io, SvgPlotIsWellFormed) {
    io::write_svg_plot(scratch("p.svg"), "title", "t", "y", {{"a", {0, 1, 2}, {1, 4, 9}}, {"b", {0, 2}, {0, 0}}});
    std::ifstream f(scratch("p.svg"));
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    EXPECT_EQ(s.rfind("<svg", 0), 0u);
    EXPECT_NE(s.find("</svg>"), std::string::npos);
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n') > 5, true);
    EXPECT_NE(s.find("polyline"), std::string::npos);
}
