// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/log.hpp"

#include <iostream>
#include <mutex>

namespace pulse {

namespace {
std::mutex g_mutex;
WarningSink g_sink;
}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(g_mutex);
  if (g_sink) {
    g_sink(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(g_mutex);
  auto previous = std::move(g_sink);
  g_sink = std::move(sink);
  return previous;
}

}  // namespace pulse
