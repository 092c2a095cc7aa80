#ifdef BIG_ENDIAN_HOST
#define LOAD16(p) ((uint16_t)((p)[0] << 8 | (p)[1]))
#else
#define LOAD16(p) ((uint16_t)((p)[1] | (p)[0] << 8))
#endif

static int read_word(const uint8_t *p)
{
	return LOAD16(p);
}
