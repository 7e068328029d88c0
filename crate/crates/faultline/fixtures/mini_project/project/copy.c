#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#define REGION_BYTES 16

static char *make_buffer(void)
{
    char *buf = malloc(REGION_BYTES);

    if (buf)
        memset(buf, 0, REGION_BYTES);
    return buf;
}

static void report_overflow(int len)
{
    fprintf(stderr, "==4242==ERROR: AddressSanitizer: heap-buffer-overflow on address 0x602000000010\n");
    fprintf(stderr, "WRITE of size %d at 0x602000000010 thread T0\n", len);
    fprintf(stderr, "    #0 0x4011aa in copy_bytes copy.c:44:9\n");
    fprintf(stderr, "    #1 0x4012bb in parse_header parse.c:28\n");
    fprintf(stderr, "    #2 0x4013cc in main main.c:13\n");
    fprintf(stderr, "\n");
    fprintf(stderr, "0x602000000010 is located 0 bytes to the right of 16-byte region\n");
    fprintf(stderr, "allocated by thread T0 here:\n");
    fprintf(stderr, "    #0 0x45aa11 in malloc asan_malloc.cpp:69\n");
    fprintf(stderr, "    #1 0x4014dd in make_buffer copy.c:9\n");
    fprintf(stderr, "\n");
    fprintf(stderr, "SUMMARY: AddressSanitizer: heap-buffer-overflow copy.c:44:9 in copy_bytes\n");
}

/* Sanitizer stand-in: a declared length past the region boundary emits
 * the overflow report and aborts, exactly as the instrumented build
 * would; real memory is never touched out of bounds. */
int copy_bytes(const char *payload, int len)
{
    char *buf = make_buffer();
    size_t have;

    if (!buf)
        return 2;
    if (len > REGION_BYTES) {
        report_overflow(len);
        free(buf);
        exit(1);
    }
    have = strlen(payload);
    if (len > 0)
        memcpy(buf, payload, (size_t)len < have ? (size_t)len : have);
    free(buf);
    return 0;
}
