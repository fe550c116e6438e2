/*
 * Copyright (C) 2026 The terl-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
*/

#pragma once

#include <cmath>
#include <numbers>

namespace terl {

struct Vec2
{
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2& operator+=(const Vec2& o)
  {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
  constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
};

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a)
{
  double w = std::fmod(a + kPi, kTwoPi);
  if (w < 0.0)
    w += kTwoPi;
  w -= kPi;
  // fmod rounding can land exactly on +pi
  if (w >= kPi)
    w -= kTwoPi;
  return w;
}

inline Vec2 unit_from_heading(double heading)
{
  return {std::cos(heading), std::sin(heading)};
}

/// Rotates v by angle (counter-clockwise).
inline Vec2 rotate(const Vec2& v, double angle)
{
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

inline double bearing(const Vec2& from, const Vec2& to)
{
  return std::atan2(to.y - from.y, to.x - from.x);
}

} // namespace terl
