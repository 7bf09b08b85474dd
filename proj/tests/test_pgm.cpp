#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "drowsy/pgm.hpp"
#include "support.hpp"

using namespace drowsy;
using testing_support::TempDir;

TEST(Pgm, StreamRoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  const auto img = testing_support::random_image(37, 23, rng);
  std::stringstream ss;
  write_pgm(ss, img);
  EXPECT_EQ(read_pgm(ss), img);
}

TEST(Pgm, FileRoundTrip) {
  TempDir dir("pgm");
  std::mt19937_64 rng(2);
  const auto img = testing_support::random_image(5, 9, rng);
  write_pgm(dir / "a.pgm", img);
  EXPECT_EQ(read_pgm(dir / "a.pgm"), img);
}

TEST(Pgm, HeaderCommentsAndWhitespace) {
  std::stringstream ss;
  ss << "P5\n# made by hand\n2   1\n# another\n255\n";
  ss.write("\x05\xfa", 2);
  const auto img = read_pgm(ss);
  EXPECT_EQ(img.width(), 2);
  EXPECT_EQ(img.at(0, 0), 5);
  EXPECT_EQ(img.at(1, 0), 250);
}

TEST(Pgm, RejectsMalformedInput) {
  {
    std::stringstream ss("P2\n1 1\n255\n0");
    EXPECT_THROW(read_pgm(ss), FormatError);
  }
  {
    std::stringstream ss("P5\n2 2\n65535\n");
    EXPECT_THROW(read_pgm(ss), FormatError);
  }
  {
    std::stringstream ss("P5\n4 4\n255\nabc");
    EXPECT_THROW(read_pgm(ss), FormatError);
  }
  EXPECT_THROW(read_pgm(std::filesystem::path("/nonexistent/x.pgm")), FormatError);
}

TEST(FrameSources, DirectoryInLexicographicOrder) {
  TempDir dir("frames");
  for (int v : {3, 1, 2}) write_pgm(dir / ("f" + std::to_string(v) + ".pgm"), GrayImage(4, 3, static_cast<std::uint8_t>(v)));
  {
    std::ofstream(dir / "notes.txt") << "ignored";
  }
  DirectoryFrameSource src(dir.path());
  EXPECT_EQ(src.frame_count(), 3u);
  for (int expect = 1; expect <= 3; ++expect) {
    EXPECT_EQ(src.index(), expect - 1);
    auto f = src.next();
    ASSERT_TRUE(f);
    EXPECT_EQ(f->at(0, 0), expect);
  }
  EXPECT_FALSE(src.next());
}

TEST(FrameSources, SizeChangeNamesTheFrame) {
  TempDir dir("frames_mixed");
  write_pgm(dir / "a.pgm", GrayImage(4, 3));
  write_pgm(dir / "b.pgm", GrayImage(5, 3));
  DirectoryFrameSource src(dir.path());
  ASSERT_TRUE(src.next());
  try {
    src.next();
    FAIL() << "expected a size error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos);
  }
}

TEST(FrameSources, RawStream) {
  std::string bytes(2 * 6, '\0');
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<char>(i);
  std::istringstream in(bytes);
  RawStreamFrameSource src(in, 3, 2);
  auto a = src.next();
  auto b = src.next();
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->at(2, 1), 5);
  EXPECT_EQ(b->at(0, 0), 6);
  EXPECT_FALSE(src.next());

  std::istringstream short_in(std::string(7, 'x'));
  RawStreamFrameSource partial(short_in, 3, 2);
  ASSERT_TRUE(partial.next());
  EXPECT_THROW(partial.next(), FormatError);
}
