#ifndef RECTNET_CSV_HPP_
#define RECTNET_CSV_HPP_

#include <cstdio>
#include <string>

namespace rectnet {

/// Canonical number formatting for CSV output: shortest representation at
/// 12 significant digits. Fixed here so identical runs emit identical bytes.
inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace rectnet

#endif  // RECTNET_CSV_HPP_
