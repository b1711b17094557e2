#pragma once

#include "ace.hpp"
#include "color.hpp"
#include "config.hpp"
#include "error.hpp"
#include "image.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "restore.hpp"
#include "rtv.hpp"
#include "texture.hpp"
